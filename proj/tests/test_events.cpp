#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nilm/events.hpp"
#include "nilm/rng.hpp"
#include "oracles.hpp"

using namespace nilm;

namespace {

PowerSeries series_of(std::vector<double> power) {
    PowerSeries s;
    s.power = std::move(power);
    s.timestamps.resize(s.power.size());
    for (std::size_t i = 0; i < s.timestamps.size(); ++i)
        s.timestamps[i] = static_cast<double>(i);
    return s;
}

PowerSeries random_trace(Rng& rng, std::size_t n) {
    PowerSeries s;
    s.timestamps.resize(n);
    s.power.resize(n);
    double t = 0.0;
    bool running = false;
    double level = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t += 0.5 + rng.uniform();
        // Random appliance-ish behavior: occasional state flips with level
        // noise, so traces cross the thresholds in both directions.
        if (rng.uniform() < 0.15) {
            running = !running;
            level = running ? 20.0 + 80.0 * rng.uniform() : 5.0 * rng.uniform();
        }
        s.timestamps[i] = t;
        s.power[i] = std::max(0.0, level + 4.0 * rng.normal());
    }
    return s;
}

}  // namespace

TEST_CASE("threshold pair validates on > off >= 0") {
    CHECK_NOTHROW(EventThresholds{25.0, 20.0}.validate());
    CHECK_THROWS_AS((EventThresholds{20.0, 20.0}.validate()), Error);
    CHECK_THROWS_AS((EventThresholds{10.0, 20.0}.validate()), Error);
    CHECK_THROWS_AS((EventThresholds{5.0, -1.0}.validate()), Error);
}

TEST_CASE("a single activation yields one ON and one OFF at the crossing samples") {
    PowerSeries s = series_of({2.0, 3.0, 2100.0, 2105.0, 2101.0, 3.0, 2.5});
    auto events = detect_events(s, {25.0, 20.0});
    REQUIRE(events.size() == 2);
    CHECK(events[0].kind == EventKind::On);
    CHECK(events[0].timestamp == 2.0);
    CHECK(events[1].kind == EventKind::Off);
    CHECK(events[1].timestamp == 5.0);
}

TEST_CASE("boundary equality counts as a crossing in both directions") {
    PowerSeries s = series_of({0.0, 25.0, 20.0, 0.0});
    auto events = detect_events(s, {25.0, 20.0});
    REQUIRE(events.size() == 2);
    CHECK(events[0].timestamp == 1.0);  // power == on threshold fires
    CHECK(events[1].timestamp == 2.0);  // power == off threshold releases
}

TEST_CASE("dips that stay above the off threshold never retrigger") {
    PowerSeries s = series_of({0.0, 100.0, 22.0, 100.0, 21.0, 100.0, 0.0});
    auto events = detect_events(s, {25.0, 20.0});
    REQUIRE(events.size() == 2);  // single activation despite two dips to ~21 W
    CHECK(events[0].timestamp == 1.0);
    CHECK(events[1].timestamp == 6.0);
}

TEST_CASE("trace that starts high fires ON at the first sample") {
    PowerSeries s = series_of({50.0, 50.0, 0.0});
    auto events = detect_events(s, {25.0, 20.0});
    REQUIRE(events.size() == 2);
    CHECK(events[0].timestamp == 0.0);
}

TEST_CASE("flat zero trace produces no events") {
    PowerSeries s = series_of({0.0, 0.0, 0.0, 0.0});
    CHECK(detect_events(s, {25.0, 20.0}).empty());
}

TEST_CASE("detector agrees with the brute-force state machine on random traces") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        PowerSeries s = random_trace(rng, 60);
        const double off = 25.0 * rng.uniform();
        const double on = off + 1.0 + 50.0 * rng.uniform();
        auto got = detect_events(s, {on, off});
        auto want = oracles::naive_events(s.timestamps, s.power, on, off);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK((got[i].kind == EventKind::On) == want[i].on);
            CHECK(got[i].timestamp == want[i].timestamp);
        }
    }
}

TEST_CASE("events alternate starting with ON and timestamps increase") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        PowerSeries s = random_trace(rng, 80);
        auto events = detect_events(s, {25.0, 20.0});
        for (std::size_t i = 0; i < events.size(); ++i) {
            const bool expect_on = i % 2 == 0;
            CHECK((events[i].kind == EventKind::On) == expect_on);
            if (i > 0) CHECK(events[i].timestamp > events[i - 1].timestamp);
        }
    }
}

TEST_CASE("raising the on threshold never increases the ON count") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        PowerSeries s = random_trace(rng, 80);
        std::size_t previous = std::numeric_limits<std::size_t>::max();
        for (double on : {21.0, 40.0, 60.0, 90.0}) {
            auto events = detect_events(s, {on, 20.0});
            std::size_t on_count = 0;
            for (const auto& e : events)
                if (e.kind == EventKind::On) ++on_count;
            CHECK(on_count <= previous);
            previous = on_count;
        }
    }
}

TEST_CASE("segment extraction cuts the nearest-sample window") {
    SamplingContext ctx = make_context(2000, 50, 0.5);
    const std::size_t n = 5000;
    std::vector<double> current(n), voltage(n);
    for (std::size_t i = 0; i < n; ++i) {
        current[i] = static_cast<double>(i);
        voltage[i] = -static_cast<double>(i);
    }
    // Stream starts at t=100 s; event at 100.7 s → sample 1400.
    EventSegment seg = extract_segment(current, voltage, ctx, 100.7, 100.0);
    REQUIRE(seg.current.size() == 1000);
    CHECK(seg.current.front() == 1400.0);
    CHECK(seg.current.back() == 2399.0);
    CHECK(seg.voltage.front() == -1400.0);
    CHECK(seg.timestamp == 100.7);

    // Sub-sample event times round to the nearest sample.
    EventSegment rounded = extract_segment(current, voltage, ctx, 100.70004, 100.0);
    CHECK(rounded.current.front() == 1400.0);
}

TEST_CASE("segment extraction rejects windows outside the stream") {
    SamplingContext ctx = make_context(2000, 50, 0.5);
    std::vector<double> stream(1500, 1.0);
    CHECK_THROWS_AS(extract_segment(stream, stream, ctx, 9.9, 10.0), OutOfRange);
    CHECK_THROWS_AS(extract_segment(stream, stream, ctx, 10.3, 10.0), OutOfRange);  // 600+1000>1500
    CHECK_NOTHROW(extract_segment(stream, stream, ctx, 10.25, 10.0));  // 500+1000 == 1500
    std::vector<double> shorter(1400, 1.0);
    CHECK_THROWS_AS(extract_segment(stream, shorter, ctx, 10.0, 10.0), LengthMismatch);
}

TEST_CASE("built-in threshold table holds valid hysteresis pairs") {
    const auto& table = builtin_thresholds();
    CHECK(table.size() >= 24);
    for (const auto& [name, pair] : table) {
        CAPTURE(name);
        CHECK_NOTHROW(pair.validate());
    }
    EventThresholds kettle = default_thresholds("kettle");
    CHECK(kettle.on_threshold == 2000.0);
    EventThresholds fallback = default_thresholds("blond_default");
    CHECK(fallback.on_threshold == 25.0);
    CHECK(fallback.off_threshold == 20.0);
    CHECK_THROWS_AS(default_thresholds("warp_drive"), UnknownAppliance);
}

TEST_CASE("threshold override files parse names, comments and blank lines") {
    const std::string path = "/tmp/nilm_test_thresholds.txt";
    {
        std::ofstream out(path);
        out << "# custom pairs\n";
        out << "kettle 1800 15\n";
        out << "\n";
        out << "widget 42 7   # trailing comment\n";
    }
    ThresholdTable table = read_threshold_table(path);
    REQUIRE(table.size() == 2);
    CHECK(table.at("kettle").on_threshold == 1800.0);
    CHECK(table.at("widget").off_threshold == 7.0);

    {
        std::ofstream out(path);
        out << "kettle 1800\n";  // missing off value
    }
    CHECK_THROWS_AS(read_threshold_table(path), FormatError);

    {
        std::ofstream out(path);
        out << "kettle 10 20\n";  // on <= off
    }
    CHECK_THROWS_AS(read_threshold_table(path), Error);
    std::remove(path.c_str());
}
