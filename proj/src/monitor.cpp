#include "agentwatch/monitor.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

namespace {

const char* const kStatNames[] = {"entropy", "varentropy", "kurtosis"};

void check_mask(unsigned mask) {
    if (mask == 0 || mask > kMaskAll)
        throw Error(ErrorCode::invalid_argument, fmt::format("feature mask {} out of range", mask));
}

void check_degree(int degree) {
    if (degree < 1 || degree > kMaxDegree)
        throw Error(ErrorCode::invalid_argument, fmt::format("degree {} outside [1, 5]", degree));
}

std::vector<double> raw_inputs(unsigned mask, const FeatureVector& f) {
    const double stats[] = {f.max_entropy, f.max_varentropy, f.max_kurtosis};
    std::vector<double> x;
    for (int i = 0; i < 3; ++i)
        if (mask & (1u << i)) x.push_back(stats[i]);
    x.push_back(static_cast<double>(f.turn_index));
    return x;
}

void append_tuples(int n, int length, int start, std::vector<int>& current,
                   std::vector<std::vector<int>>& out) {
    if (static_cast<int>(current.size()) == length) {
        std::vector<int> exponents(static_cast<std::size_t>(n), 0);
        for (const int i : current) ++exponents[static_cast<std::size_t>(i)];
        out.push_back(std::move(exponents));
        return;
    }
    for (int i = start; i < n; ++i) {
        current.push_back(i);
        append_tuples(n, length, i, current, out);
        current.pop_back();
    }
}

const std::vector<std::vector<int>>& cached_monomials(int n, int degree) {
    // n in [2, 4], degree in [1, 5]
    static const auto table = [] {
        std::map<std::pair<int, int>, std::vector<std::vector<int>>> t;
        for (int n = 1; n <= 4; ++n)
            for (int d = 0; d <= kMaxDegree; ++d) t[{n, d}] = monomials(n, d);
        return t;
    }();
    const auto it = table.find({n, degree});
    if (it == table.end()) throw Error(ErrorCode::invalid_argument, "unsupported monomial shape");
    return it->second;
}

bool better_cell(const GridCell& a, const GridCell& b) {
    if (a.net != b.net) return a.net > b.net;
    if (a.degree != b.degree) return a.degree < b.degree;
    const int pa = std::popcount(a.mask), pb = std::popcount(b.mask);
    if (pa != pb) return pa < pb;
    if (a.mask != b.mask) return a.mask < b.mask;
    return a.tau < b.tau;
}

} // namespace

std::vector<std::string> mask_names(unsigned mask) {
    check_mask(mask);
    std::vector<std::string> names;
    for (int i = 0; i < 3; ++i)
        if (mask & (1u << i)) names.emplace_back(kStatNames[i]);
    return names;
}

unsigned mask_from_names(const std::vector<std::string>& names) {
    unsigned mask = 0;
    for (const auto& name : names) {
        bool found = false;
        for (int i = 0; i < 3; ++i) {
            if (name == kStatNames[i]) {
                mask |= 1u << i;
                found = true;
            }
        }
        if (!found) throw Error(ErrorCode::parse_error, fmt::format("unknown feature '{}'", name));
    }
    check_mask(mask);
    return mask;
}

TrainingCorpus corpus_from_trajectories(std::span<const Trajectory> trajectories,
                                        const std::string& role) {
    TrainingCorpus corpus;
    for (const auto& t : trajectories) {
        if (t.invalid || t.intervened()) continue;
        const bool label = t.succeeded();
        for (const auto& r : t.turns)
            if (r.role == role && r.features)
                corpus.rows.push_back({*r.features, t.game_id, role, label});
    }
    return corpus;
}

std::vector<LabeledGame> games_from_trajectories(std::span<const Trajectory> trajectories,
                                                 const std::string& role) {
    std::vector<LabeledGame> games;
    for (const auto& t : trajectories) {
        if (t.invalid || t.intervened()) continue;
        LabeledGame g;
        g.game_id = t.game_id;
        g.success = t.succeeded();
        for (const auto& r : t.turns)
            if (r.role == role && r.features) g.turns.push_back(*r.features);
        games.push_back(std::move(g));
    }
    return games;
}

std::vector<LabeledGame> games_from_corpus(const TrainingCorpus& corpus) {
    std::vector<LabeledGame> games;
    std::map<std::string, std::size_t> index;
    for (const auto& row : corpus.rows) {
        auto [it, inserted] = index.emplace(row.game_id, games.size());
        if (inserted) games.push_back({row.game_id, row.label, {}});
        games[it->second].turns.push_back(row.features);
    }
    return games;
}

std::vector<std::vector<int>> monomials(int n_inputs, int degree) {
    if (n_inputs < 1 || degree < 0) throw Error(ErrorCode::invalid_argument, "bad monomial shape");
    std::vector<std::vector<int>> out;
    std::vector<int> current;
    for (int d = 0; d <= degree; ++d) append_tuples(n_inputs, d, 0, current, out);
    return out;
}

std::size_t monomial_count(int n_inputs, int degree) {
    // C(n + D, D)
    double c = 1.0;
    for (int i = 1; i <= degree; ++i) c = c * (n_inputs + i) / i;
    return static_cast<std::size_t>(std::llround(c));
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
    if (X.rows() != y.size() || X.rows() == 0)
        throw Error(ErrorCode::invalid_argument, "design matrix and labels disagree");
    if (!(alpha >= 0.0)) throw Error(ErrorCode::invalid_argument, "alpha must be >= 0");
    if (alpha == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        if (qr.rank() < X.cols())
            throw Error(ErrorCode::singular_system, "design matrix is rank-deficient");
        return qr.solve(y);
    }
    Eigen::MatrixXd A = X.transpose() * X;
    A.diagonal().tail(A.rows() - 1).array() += alpha;
    return A.ldlt().solve(X.transpose() * y);
}

std::size_t MonitorModel::input_count() const {
    return static_cast<std::size_t>(std::popcount(feature_mask)) + 1;
}

std::vector<double> MonitorModel::inputs(const FeatureVector& f) const {
    return raw_inputs(feature_mask, f);
}

std::vector<double> MonitorModel::normalize(const FeatureVector& f) const {
    auto x = inputs(f);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& b = normalization.at(i);
        const double span = b.max - b.min;
        x[i] = span > 0.0 ? 2.0 * (x[i] - b.min) / span - 1.0 : 0.0;
    }
    return x;
}

std::vector<double> expand(std::span<const double> normalized, int degree) {
    const auto& terms = cached_monomials(static_cast<int>(normalized.size()), degree);
    std::vector<double> row;
    row.reserve(terms.size());
    for (const auto& exps : terms) {
        double v = 1.0;
        for (std::size_t i = 0; i < exps.size(); ++i)
            for (int e = 0; e < exps[i]; ++e) v *= normalized[i];
        row.push_back(v);
    }
    return row;
}

double MonitorModel::raw_output(const FeatureVector& f) const {
    const auto x = normalize(f);
    const auto row = expand(x, degree);
    if (row.size() != weights.size())
        throw Error(ErrorCode::invalid_argument, "weight count does not match the monomial count");
    double out = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) out += row[i] * weights[i];
    return out;
}

double MonitorModel::predict(const FeatureVector& f) const {
    return std::clamp(raw_output(f), 0.0, 1.0);
}

void to_json(nlohmann::json& j, const MonitorModel& m) {
    const auto names = mask_names(m.feature_mask);
    nlohmann::json norm = nlohmann::json::array();
    for (std::size_t i = 0; i < m.normalization.size(); ++i)
        norm.push_back({{"feature", i < names.size() ? names[i] : std::string("turn")},
                        {"min", m.normalization[i].min},
                        {"max", m.normalization[i].max}});
    j = {{"role", m.role},
         {"feature_mask", names},
         {"degree", m.degree},
         {"alpha", m.alpha},
         {"normalization", norm},
         {"weights", m.weights},
         {"tau", m.tau},
         {"validation_gain", m.validation_gain}};
}

void from_json(const nlohmann::json& j, MonitorModel& m) {
    m.role = j.value("role", std::string{});
    m.feature_mask = mask_from_names(j.at("feature_mask").get<std::vector<std::string>>());
    m.degree = j.at("degree").get<int>();
    check_degree(m.degree);
    m.alpha = j.value("alpha", kDefaultAlpha);
    m.normalization.clear();
    for (const auto& b : j.at("normalization"))
        m.normalization.push_back({b.at("min").get<double>(), b.at("max").get<double>()});
    m.weights = j.at("weights").get<std::vector<double>>();
    m.tau = j.at("tau").get<double>();
    m.validation_gain = j.value("validation_gain", 0.0);
    if (m.normalization.size() != m.input_count())
        throw Error(ErrorCode::parse_error, "normalization does not match the feature mask");
    if (m.weights.size() != monomial_count(static_cast<int>(m.input_count()), m.degree))
        throw Error(ErrorCode::parse_error, "weight count does not match the monomial count");
}

MonitorModel fit_monitor(const TrainingCorpus& train, unsigned mask, int degree, double alpha,
                         const std::string& role) {
    check_mask(mask);
    check_degree(degree);
    if (train.rows.empty()) throw Error(ErrorCode::insufficient_data, "empty training corpus");

    MonitorModel m;
    m.role = role;
    m.feature_mask = mask;
    m.degree = degree;
    m.alpha = alpha;
    const std::size_t f = m.input_count();
    m.normalization.assign(f, {std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity()});
    for (const auto& row : train.rows) {
        const auto x = raw_inputs(mask, row.features);
        for (std::size_t i = 0; i < f; ++i) {
            m.normalization[i].min = std::min(m.normalization[i].min, x[i]);
            m.normalization[i].max = std::max(m.normalization[i].max, x[i]);
        }
    }

    const auto n_terms = monomial_count(static_cast<int>(f), degree);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(train.rows.size()), static_cast<Eigen::Index>(n_terms));
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.rows.size()));
    for (std::size_t r = 0; r < train.rows.size(); ++r) {
        const auto row = expand(m.normalize(train.rows[r].features), degree);
        for (std::size_t c = 0; c < n_terms; ++c)
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        y(static_cast<Eigen::Index>(r)) = train.rows[r].label ? 1.0 : 0.0;
    }
    const Eigen::VectorXd w = fit_ridge(X, y, alpha);
    m.weights.assign(w.data(), w.data() + w.size());
    return m;
}

namespace {

std::vector<double> game_minima(const MonitorModel& model, std::span<const LabeledGame> games) {
    std::vector<double> minima;
    minima.reserve(games.size());
    for (const auto& g : games) {
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& f : g.turns) lowest = std::min(lowest, model.predict(f));
        minima.push_back(lowest);
    }
    return minima;
}

GainCount count_from_minima(std::span<const double> minima, std::span<const LabeledGame> games,
                            double tau) {
    GainCount c;
    c.games = static_cast<int>(games.size());
    for (std::size_t i = 0; i < games.size(); ++i) {
        if (!(minima[i] < tau)) continue;
        if (games[i].success) ++c.false_triggers;
        else ++c.true_triggers;
    }
    return c;
}

} // namespace

GainCount count_triggers(const MonitorModel& model, double tau, std::span<const LabeledGame> games) {
    const auto minima = game_minima(model, games);
    return count_from_minima(minima, games, tau);
}

double validation_gain(const MonitorModel& model, double tau, std::span<const LabeledGame> games) {
    return count_triggers(model, tau, games).gain();
}

std::vector<double> tau_grid() {
    std::vector<double> taus;
    for (int k = 0; k <= 100; ++k) taus.push_back(k / 100.0);
    return taus;
}

GridResult grid_search(const TrainingCorpus& train, std::span<const LabeledGame> validation,
                       double alpha, const std::string& role) {
    if (train.rows.empty()) throw Error(ErrorCode::insufficient_data, "empty training corpus");
    if (validation.empty()) throw Error(ErrorCode::insufficient_data, "empty validation set");

    struct Slot {
        MonitorModel model;
        GridCell cell;
    };
    std::vector<Slot> slots;
    for (int d = 1; d <= kMaxDegree; ++d)
        for (unsigned mask = 1; mask <= kMaskAll; ++mask) slots.push_back({{}, {d, mask, 0.0, 0, 0.0}});

    const auto taus = tau_grid();
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(slots.size());
    const auto work = [&] {
        for (std::size_t i = next++; i < slots.size(); i = next++) {
            try {
                auto& s = slots[i];
                s.model = fit_monitor(train, s.cell.mask, s.cell.degree, alpha, role);
                const auto minima = game_minima(s.model, validation);
                bool first = true;
                for (const double tau : taus) {
                    const auto c = count_from_minima(minima, validation, tau);
                    if (first || c.net() > s.cell.net) {
                        s.cell.net = c.net();
                        s.cell.tau = tau;
                        s.cell.gain = c.gain();
                        first = false;
                    }
                }
                s.model.tau = s.cell.tau;
                s.model.validation_gain = s.cell.gain;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        const auto hw = std::max(1u, std::thread::hardware_concurrency());
        const auto n = std::min<std::size_t>(hw, slots.size());
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
        work();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<std::size_t> order(slots.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return better_cell(slots[a].cell, slots[b].cell); });

    GridResult result;
    for (const auto i : order) result.ranking.push_back(slots[i].cell);
    result.best = slots[order.front()].model;
    result.second_best = slots[order[1]].model;
    result.worst = slots[order.back()].model;
    return result;
}

RandomMonitor::RandomMonitor(double p, std::uint64_t seed) : p_(p), rng_(seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "p must lie in [0, 1]");
}

bool RandomMonitor::fires() { return rng_.uniform() < p_; }

RandomCalibration calibrate_random_monitor(std::span<const LabeledGame> validation) {
    if (validation.empty()) throw Error(ErrorCode::insufficient_data, "empty validation set");
    RandomCalibration best;
    bool first = true;
    for (const double p : tau_grid()) {
        double net = 0.0;
        for (const auto& g : validation) {
            const double hit = 1.0 - std::pow(1.0 - p, static_cast<double>(g.turns.size()));
            net += g.success ? -hit : hit;
        }
        const double gain = 100.0 * net / static_cast<double>(validation.size());
        if (first || gain > best.expected_gain + 1e-12) {
            best = {p, gain};
            first = false;
        }
    }
    return best;
}

} // namespace agentwatch
