#include "nilm/classify.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace nilm {
namespace {

/// Lexicographic row order; makes float accumulations independent of the
/// caller's row permutation.
std::vector<long> canonical_row_order(const Eigen::MatrixXd& x, const std::vector<long>& rows) {
    std::vector<long> order = rows;
    std::sort(order.begin(), order.end(), [&x](long a, long b) {
        for (long j = 0; j < x.cols(); ++j) {
            if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
        }
        return false;
    });
    return order;
}

double gini(const std::vector<long>& counts, long total) {
    if (total == 0) return 0.0;
    double acc = 0.0;
    for (long c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        acc += p * p;
    }
    return 1.0 - acc;
}

struct TrainView {
    const Eigen::MatrixXd& x;
    std::vector<int> y;                 // class indices per row
    std::vector<std::string> classes;   // sorted
};

TrainView make_view(const FeatureMatrix& train) {
    train.validate();
    if (train.rows() == 0) throw EmptyTrainSet("training matrix has no rows");
    std::set<std::string> unique(train.labels.begin(), train.labels.end());
    if (unique.size() < 2) throw SingleClass("training set holds fewer than 2 classes");
    TrainView view{train.values, {}, {unique.begin(), unique.end()}};
    view.y.reserve(train.labels.size());
    for (const auto& label : train.labels) {
        const auto it = std::lower_bound(view.classes.begin(), view.classes.end(), label);
        view.y.push_back(static_cast<int>(it - view.classes.begin()));
    }
    return view;
}

void train_knn(TrainedClassifier& model, const TrainView& view, const ClassifierConfig& config) {
    if (config.knn_k > view.x.rows()) {
        throw Error("knn_k=" + std::to_string(config.knn_k) + " exceeds the training size " +
                    std::to_string(view.x.rows()));
    }
    model.knn_points = view.x;
    model.knn_labels = view.y;
    model.knn_k = config.knn_k;
}

void train_lda(TrainedClassifier& model, const TrainView& view, const ClassifierConfig& config) {
    const long d = view.x.cols();
    const long n = view.x.rows();
    const long n_classes = static_cast<long>(view.classes.size());

    std::vector<std::vector<long>> members(static_cast<std::size_t>(n_classes));
    for (long r = 0; r < n; ++r) {
        members[static_cast<std::size_t>(view.y[static_cast<std::size_t>(r)])].push_back(r);
    }
    for (auto& rows : members) rows = canonical_row_order(view.x, rows);

    model.lda_means.resize(n_classes, d);
    model.lda_log_priors.resize(n_classes);
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
    for (long c = 0; c < n_classes; ++c) {
        const auto& rows = members[static_cast<std::size_t>(c)];
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
        for (long r : rows) mean += view.x.row(r);
        mean /= static_cast<double>(rows.size());
        model.lda_means.row(c) = mean;
        model.lda_log_priors(c) =
            std::log(static_cast<double>(rows.size()) / static_cast<double>(n));
        for (long r : rows) {
            const Eigen::RowVectorXd diff = view.x.row(r) - mean;
            pooled.noalias() += diff.transpose() * diff;
        }
    }
    pooled /= static_cast<double>(n - n_classes);

    double lambda = config.lda_shrinkage;
    if (lambda < 0.0) {
        lambda = std::max(1e-6 * pooled.trace() / static_cast<double>(d), 1e-12);
    }
    pooled.diagonal().array() += lambda;

    Eigen::LLT<Eigen::MatrixXd> llt(pooled);
    if (llt.info() != Eigen::Success) {
        throw Error("pooled covariance is not positive definite even after shrinkage");
    }
    model.lda_cov_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
}

SvmFitResult fit_linear_svm_impl(const Eigen::MatrixXd& x_raw, const std::vector<int>& y,
                                 double cost, int epochs) {
    const long n = x_raw.rows();
    const long d = x_raw.cols();
    const double lambda = 1.0 / (cost * static_cast<double>(n));

    // Subgradient descent is badly conditioned when the data sits far from
    // the origin relative to the class gap (the bias then has to travel a
    // long way), so the descent runs in standardized coordinates and the
    // solution is mapped back onto raw features afterwards.
    Eigen::RowVectorXd mu = x_raw.colwise().mean();
    Eigen::RowVectorXd sigma =
        ((x_raw.rowwise() - mu).array().square().colwise().mean()).sqrt();
    for (long c = 0; c < d; ++c) {
        if (!(sigma(c) > 1e-12)) sigma(c) = 1.0;
    }
    Eigen::MatrixXd x = (x_raw.rowwise() - mu).array().rowwise() / sigma.array();

    auto objective = [&](const Eigen::VectorXd& w, double b) {
        double hinge = 0.0;
        for (long r = 0; r < n; ++r) {
            const double margin =
                static_cast<double>(y[static_cast<std::size_t>(r)]) * (x.row(r).dot(w) + b);
            hinge += std::max(0.0, 1.0 - margin);
        }
        return 0.5 * lambda * w.squaredNorm() + hinge / static_cast<double>(n);
    };
    auto subgradient = [&](const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw,
                           double& gb) {
        gw = lambda * w;
        gb = 0.0;
        for (long r = 0; r < n; ++r) {
            const double yr = static_cast<double>(y[static_cast<std::size_t>(r)]);
            if (yr * (x.row(r).dot(w) + b) < 1.0) {
                gw.noalias() -= (yr / static_cast<double>(n)) * x.row(r).transpose();
                gb -= yr / static_cast<double>(n);
            }
        }
    };

    SvmFitResult fit;
    fit.w = Eigen::VectorXd::Zero(d);
    fit.bias = 0.0;
    double current = objective(fit.w, fit.bias);

    Eigen::VectorXd gw(d);
    double gb = 0.0;
    subgradient(fit.w, fit.bias, gw, gb);
    double step = 1.0 / (1.0 + std::sqrt(gw.squaredNorm() + gb * gb));

    fit.objective_history.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        subgradient(fit.w, fit.bias, gw, gb);
        // Backtracking line search along the subgradient keeps the objective
        // monotone regardless of feature scale; the step expands again after
        // every accepted epoch so one overshoot cannot stall the descent.
        bool accepted = false;
        for (int halvings = 0; halvings < 40; ++halvings) {
            const Eigen::VectorXd trial_w = fit.w - step * gw;
            const double trial_b = fit.bias - step * gb;
            const double trial = objective(trial_w, trial_b);
            if (trial <= current) {
                fit.w = trial_w;
                fit.bias = trial_b;
                current = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (accepted) step *= 2.0;
        fit.objective_history.push_back(current);
    }

    // Map (w, b) back to raw coordinates: w_raw = w / sigma,
    // b_raw = b - sum_i w_i mu_i / sigma_i.
    for (long c = 0; c < d; ++c) {
        fit.bias -= fit.w(c) * mu(c) / sigma(c);
        fit.w(c) /= sigma(c);
    }
    return fit;
}

void train_svm(TrainedClassifier& model, const TrainView& view, const ClassifierConfig& config) {
    const long n_classes = static_cast<long>(view.classes.size());
    std::vector<std::vector<long>> members(static_cast<std::size_t>(n_classes));
    for (long r = 0; r < view.x.rows(); ++r) {
        members[static_cast<std::size_t>(view.y[static_cast<std::size_t>(r)])].push_back(r);
    }
    for (long a = 0; a < n_classes; ++a) {
        for (long b = a + 1; b < n_classes; ++b) {
            std::vector<long> rows = members[static_cast<std::size_t>(a)];
            rows.insert(rows.end(), members[static_cast<std::size_t>(b)].begin(),
                        members[static_cast<std::size_t>(b)].end());
            rows = canonical_row_order(view.x, rows);
            Eigen::MatrixXd x(static_cast<long>(rows.size()), view.x.cols());
            std::vector<int> y(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                x.row(static_cast<long>(i)) = view.x.row(rows[i]);
                y[i] = view.y[static_cast<std::size_t>(rows[i])] == a ? 1 : -1;
            }
            SvmFitResult fit = fit_linear_svm_impl(x, y, config.svm_cost, config.svm_epochs);
            model.svm_pairs.push_back(
                {static_cast<int>(a), static_cast<int>(b), std::move(fit.w), fit.bias});
        }
    }
}

void train_bdt(TrainedClassifier& model, const TrainView& view, const ClassifierConfig& config) {
    const long n_classes = static_cast<long>(view.classes.size());

    struct Pending {
        std::vector<long> rows;
        int depth;
        int node;
    };

    auto leaf_class = [&](const std::vector<long>& rows) {
        std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
        for (long r : rows) ++counts[static_cast<std::size_t>(view.y[static_cast<std::size_t>(r)])];
        return static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                                counts.begin());  // ties: smallest class index
    };

    model.bdt_nodes.push_back({});
    std::vector<Pending> stack;
    {
        std::vector<long> all(static_cast<std::size_t>(view.x.rows()));
        std::iota(all.begin(), all.end(), 0);
        stack.push_back({std::move(all), 0, 0});
    }

    while (!stack.empty()) {
        Pending item = std::move(stack.back());
        stack.pop_back();

        std::vector<long> counts(static_cast<std::size_t>(n_classes), 0);
        for (long r : item.rows) {
            ++counts[static_cast<std::size_t>(view.y[static_cast<std::size_t>(r)])];
        }
        const long total = static_cast<long>(item.rows.size());
        const bool pure =
            *std::max_element(counts.begin(), counts.end()) == total;

        if (pure || item.depth >= config.bdt_max_depth || total < config.bdt_min_split) {
            model.bdt_nodes[static_cast<std::size_t>(item.node)].leaf_class =
                leaf_class(item.rows);
            continue;
        }

        // Exhaustive search: midpoints of consecutive distinct values per
        // dimension, minimizing the weighted Gini impurity; ties resolve to
        // the smallest (dim, threshold).
        double best_impurity = std::numeric_limits<double>::infinity();
        int best_dim = -1;
        double best_thr = 0.0;
        std::vector<std::pair<double, int>> column(item.rows.size());
        std::vector<long> left_counts(static_cast<std::size_t>(n_classes));
        for (long dim = 0; dim < view.x.cols(); ++dim) {
            for (std::size_t i = 0; i < item.rows.size(); ++i) {
                column[i] = {view.x(item.rows[i], dim),
                             view.y[static_cast<std::size_t>(item.rows[i])]};
            }
            std::sort(column.begin(), column.end());
            std::fill(left_counts.begin(), left_counts.end(), 0);
            long n_left = 0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                ++left_counts[static_cast<std::size_t>(column[i].second)];
                ++n_left;
                if (column[i].first == column[i + 1].first) continue;
                const double thr = column[i].first / 2.0 + column[i + 1].first / 2.0;
                if (!(thr > column[i].first) || !(thr < column[i + 1].first)) continue;
                std::vector<long> right_counts(counts);
                for (long c = 0; c < n_classes; ++c) {
                    right_counts[static_cast<std::size_t>(c)] -=
                        left_counts[static_cast<std::size_t>(c)];
                }
                const long n_right = total - n_left;
                const double impurity =
                    (static_cast<double>(n_left) * gini(left_counts, n_left) +
                     static_cast<double>(n_right) * gini(right_counts, n_right)) /
                    static_cast<double>(total);
                if (impurity < best_impurity) {
                    best_impurity = impurity;
                    best_dim = static_cast<int>(dim);
                    best_thr = thr;
                }
            }
        }

        if (best_dim < 0) {  // every row identical in every dimension
            model.bdt_nodes[static_cast<std::size_t>(item.node)].leaf_class =
                leaf_class(item.rows);
            continue;
        }

        std::vector<long> left_rows, right_rows;
        for (long r : item.rows) {
            (view.x(r, best_dim) <= best_thr ? left_rows : right_rows).push_back(r);
        }
        const int left_node = static_cast<int>(model.bdt_nodes.size());
        model.bdt_nodes.push_back({});
        const int right_node = static_cast<int>(model.bdt_nodes.size());
        model.bdt_nodes.push_back({});
        auto& node = model.bdt_nodes[static_cast<std::size_t>(item.node)];
        node.dim = best_dim;
        node.threshold = best_thr;
        node.left = left_node;
        node.right = right_node;
        stack.push_back({std::move(right_rows), item.depth + 1, right_node});
        stack.push_back({std::move(left_rows), item.depth + 1, left_node});
    }
}

}  // namespace

std::string classifier_name(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Knn: return "knn";
        case ClassifierKind::Lda: return "lda";
        case ClassifierKind::Svm: return "svm";
        case ClassifierKind::Bdt: return "bdt";
    }
    throw Error("unknown classifier kind");
}

ClassifierKind parse_classifier(const std::string& name) {
    if (name == "knn") return ClassifierKind::Knn;
    if (name == "lda") return ClassifierKind::Lda;
    if (name == "svm") return ClassifierKind::Svm;
    if (name == "bdt") return ClassifierKind::Bdt;
    throw Error("unknown classifier '" + name + "' (expected knn, lda, svm or bdt)");
}

void ClassifierConfig::validate() const {
    if (knn_k < 1) throw Error("knn_k must be >= 1");
    if (svm_cost <= 0.0) throw Error("svm_cost must be > 0");
    if (svm_epochs < 1) throw Error("svm_epochs must be >= 1");
    if (bdt_max_depth < 1) throw Error("bdt_max_depth must be >= 1");
    if (bdt_min_split < 2) throw Error("bdt_min_split must be >= 2");
}

TrainedClassifier train_classifier(ClassifierKind kind, const FeatureMatrix& train,
                                   const ClassifierConfig& config, Rng&) {
    config.validate();
    const TrainView view = make_view(train);

    TrainedClassifier model;
    model.kind = kind;
    model.classes = view.classes;
    model.dims = view.x.cols();
    switch (kind) {
        case ClassifierKind::Knn: train_knn(model, view, config); break;
        case ClassifierKind::Lda: train_lda(model, view, config); break;
        case ClassifierKind::Svm: train_svm(model, view, config); break;
        case ClassifierKind::Bdt: train_bdt(model, view, config); break;
    }
    return model;
}

SvmFitResult fit_linear_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, double cost,
                            int epochs) {
    if (x.rows() != static_cast<long>(y.size())) {
        throw LengthMismatch("svm labels do not match the row count");
    }
    return fit_linear_svm_impl(x, y, cost, epochs);
}

namespace {

int predict_knn(const TrainedClassifier& m, const Eigen::RowVectorXd& x) {
    std::vector<std::pair<double, int>> neighbors(static_cast<std::size_t>(m.knn_points.rows()));
    for (long r = 0; r < m.knn_points.rows(); ++r) {
        neighbors[static_cast<std::size_t>(r)] = {
            (m.knn_points.row(r) - x).squaredNorm(),
            m.knn_labels[static_cast<std::size_t>(r)]};
    }
    const auto k = static_cast<std::size_t>(std::min<long>(m.knn_k, m.knn_points.rows()));
    std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<long>(k),
                      neighbors.end());
    std::vector<long> votes(m.classes.size(), 0);
    for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(neighbors[i].second)];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

int predict_lda(const TrainedClassifier& m, const Eigen::RowVectorXd& x) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < m.lda_means.rows(); ++c) {
        const Eigen::VectorXd a = m.lda_cov_inv * m.lda_means.row(c).transpose();
        const double score =
            x.dot(a.transpose()) - 0.5 * m.lda_means.row(c).dot(a.transpose()) +
            m.lda_log_priors(c);
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(c);
        }
    }
    return best;
}

int predict_svm(const TrainedClassifier& m, const Eigen::RowVectorXd& x) {
    std::vector<long> votes(m.classes.size(), 0);
    std::vector<double> margin(m.classes.size(), 0.0);
    for (const auto& pair : m.svm_pairs) {
        const double d = x.dot(pair.w.transpose()) + pair.bias;
        ++votes[static_cast<std::size_t>(d >= 0.0 ? pair.pos : pair.neg)];
        margin[static_cast<std::size_t>(pair.pos)] += d;
        margin[static_cast<std::size_t>(pair.neg)] -= d;
    }
    int best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
        if (votes[c] > votes[static_cast<std::size_t>(best)] ||
            (votes[c] == votes[static_cast<std::size_t>(best)] &&
             margin[c] > margin[static_cast<std::size_t>(best)])) {
            best = static_cast<int>(c);
        }
    }
    return best;
}

int predict_bdt(const TrainedClassifier& m, const Eigen::RowVectorXd& x) {
    int node = 0;
    while (m.bdt_nodes[static_cast<std::size_t>(node)].dim >= 0) {
        const auto& n = m.bdt_nodes[static_cast<std::size_t>(node)];
        node = x(n.dim) <= n.threshold ? n.left : n.right;
    }
    return m.bdt_nodes[static_cast<std::size_t>(node)].leaf_class;
}

}  // namespace

std::vector<std::string> predict(const TrainedClassifier& model, const FeatureMatrix& matrix) {
    matrix.validate();
    if (matrix.cols() != model.dims) {
        throw DimMismatch("classifier fitted on " + std::to_string(model.dims) +
                          " dimensions, asked to predict " + std::to_string(matrix.cols()));
    }
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(matrix.rows()));
    for (long r = 0; r < matrix.rows(); ++r) {
        const Eigen::RowVectorXd x = matrix.values.row(r);
        int idx = 0;
        switch (model.kind) {
            case ClassifierKind::Knn: idx = predict_knn(model, x); break;
            case ClassifierKind::Lda: idx = predict_lda(model, x); break;
            case ClassifierKind::Svm: idx = predict_svm(model, x); break;
            case ClassifierKind::Bdt: idx = predict_bdt(model, x); break;
        }
        out.push_back(model.classes[static_cast<std::size_t>(idx)]);
    }
    return out;
}

}  // namespace nilm
