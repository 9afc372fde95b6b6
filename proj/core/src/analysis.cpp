#include "madvm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"

namespace madvm {

namespace {

double norm2(std::span<const double> a, std::span<const double> b)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

} // namespace

std::vector<double> MappingMatrix::apply(std::span<const double> w) const
{
    if (w.size() != num_columns()) {
        throw InputError("weight vector does not match the mapping");
    }
    std::vector<double> out(num_states, 0.0);
    for (std::size_t s = 0; s < num_states; ++s) {
        for (const std::size_t c : row(s)) {
            out[s] += w[c];
        }
    }
    return out;
}

std::vector<double> MappingMatrix::select(std::span<const double> v) const
{
    if (v.size() != num_states) {
        throw InputError("utility vector does not match the mapping");
    }
    std::vector<double> out(num_columns());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = v[key_rows[c]];
    }
    return out;
}

std::vector<double> MappingMatrix::dense() const
{
    std::vector<double> m(num_states * num_columns(), 0.0);
    for (std::size_t s = 0; s < num_states; ++s) {
        for (const std::size_t c : row(s)) {
            m[s * num_columns() + c] = 1.0;
        }
    }
    return m;
}

std::vector<double> MappingMatrix::dense_selector() const
{
    std::vector<double> m(num_columns() * num_states, 0.0);
    for (std::size_t c = 0; c < num_columns(); ++c) {
        m[c * num_states + key_rows[c]] = 1.0;
    }
    return m;
}

MappingMatrix build_mapping(const ClusterSpec& spec, const DemandLevelSet& levels,
                            std::span<const FeatureState> features, std::size_t budget)
{
    spec.validate();
    const JointStateSpace space(spec.num_vms, spec.num_pms, levels.size(), budget);
    MappingMatrix m;
    m.num_states = space.size();
    m.num_vms = spec.num_vms;
    m.block = space.local_size();
    m.a = std::sqrt(static_cast<double>(m.num_vms) * static_cast<double>(m.num_states));
    m.row_columns.resize(m.num_states * m.num_vms);
    for (std::size_t s = 0; s < m.num_states; ++s) {
        std::size_t rest = s;
        for (std::size_t l = 0; l < m.num_vms; ++l) {
            m.row_columns[s * m.num_vms + l] = l * m.block + rest % m.block;
            rest /= m.block;
        }
    }
    m.key_rows.resize(m.num_columns());
    for (std::size_t l = 0; l < m.num_vms; ++l) {
        const KeyStateSet keys = build_key_states(l, features, levels, spec);
        for (std::size_t k = 0; k < keys.size(); ++k) {
            m.key_rows[l * m.block + k] = space.pack(keys.joint_state(k));
        }
    }
    return m;
}

std::vector<double> stacked_sweep(std::span<const PerVmProblem> problems, std::span<const double> x)
{
    std::vector<double> out(x.size());
    std::size_t offset = 0;
    for (const auto& p : problems) {
        p.sweep(x.subspan(offset, p.size()), std::span<double>(out).subspan(offset, p.size()));
        offset += p.size();
    }
    return out;
}

BoundReport bound_check(const ExactModel& model, const UtilityVector& v_star, std::span<const FeatureState> features,
                        const BoundCheckOptions& options)
{
    const ClusterSpec& spec = model.spec();
    const DemandLevelSet& levels = model.levels();
    if (v_star.values.size() != model.num_states()) {
        throw InputError("utility vector does not match the model");
    }
    const MappingMatrix mapping = build_mapping(spec, levels, features);
    const std::size_t ns = mapping.num_states;
    const std::size_t nc = mapping.num_columns();

    SystemState anchor;
    for (const auto& f : features) {
        anchor.levels.push_back(f.expected_level);
        anchor.placement.assignment.push_back(f.location);
    }
    const double shift = v_star.values[model.space().pack(anchor)];
    std::vector<double> v(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        v[s] = v_star.values[s] - shift;
    }

    std::vector<PerVmProblem> problems;
    std::vector<PerVMUtility> tables;
    for (std::size_t l = 0; l < spec.num_vms; ++l) {
        const KeyStateSet keys = build_key_states(l, features, levels, spec);
        problems.emplace_back(keys, model.chains()[l], levels, spec);
        tables.push_back(per_vm_value_iteration(problems.back(), l, options.vi));
    }
    BoundReport report;
    report.weights = WeightVector::from_tables(tables).values;
    report.a = mapping.a;

    // Minimum-norm least squares; M^T M is singular since every VM block of
    // a row sums to one.
    const std::vector<double> dense = mapping.dense();
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        dense.data(), static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(nc));
    const Eigen::Map<const Eigen::VectorXd> vs(v.data(), static_cast<Eigen::Index>(ns));
    const Eigen::VectorXd x = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(m).solve(vs);
    report.projection.assign(x.data(), x.data() + x.size());

    const auto& w = report.weights;
    const auto& xs = report.projection;
    report.error = norm2(mapping.apply(w), v);
    report.lower = norm2(mapping.apply(xs), v);
    const std::vector<double> key_values = mapping.select(v);
    report.projection_gap = norm2(xs, key_values);

    const double w_gap = norm2(w, xs);
    if (w_gap == 0.0) {
        report.certified = true;
        report.upper = report.lower;
        return report;
    }

    std::vector<double> fw = w;
    std::vector<double> fx = xs;
    double prev_dist = report.projection_gap;
    double c = 0.0;
    double best_upper = std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n <= options.n_max; ++n) {
        fw = stacked_sweep(problems, fw);
        fx = stacked_sweep(problems, fx);
        const double dist = norm2(fx, key_values);
        if (prev_dist > 0.0) {
            c = std::max(c, dist / prev_dist);
        }
        prev_dist = dist;
        const double beta = norm2(fw, fx) / w_gap;
        if (beta < 1.0 && c < 1.0) {
            const double upper =
                report.a * (std::pow(c, static_cast<double>(n)) + 1.0) / (1.0 - beta) * report.projection_gap +
                report.lower;
            if (upper < best_upper) {
                best_upper = upper;
                report.upper = upper;
                report.n = n;
                report.beta_contraction = beta;
                report.c = c;
                report.certified = true;
            }
        }
    }
    return report;
}

std::string bound_report_to_json(const BoundReport& report)
{
    nlohmann::json j;
    j["error"] = report.error;
    j["lower"] = report.lower;
    j["upper"] = report.certified ? nlohmann::json(report.upper) : nlohmann::json(nullptr);
    j["projection_gap"] = report.projection_gap;
    j["a"] = report.a;
    j["n"] = report.n;
    j["beta"] = report.beta_contraction;
    j["c"] = report.c;
    j["certified"] = report.certified;
    j["lower_holds"] = report.lower_holds();
    j["upper_holds"] = report.upper_holds();
    return j.dump(2);
}

std::size_t DecayReport::first_below(double tol) const
{
    for (std::size_t k = 0; k < differences.size(); ++k) {
        if (differences[k] < tol) {
            return k + 1;
        }
    }
    return 0;
}

DecayReport convergence_diagnostics(std::span<const std::vector<double>> iterates)
{
    if (iterates.size() < 3) {
        throw InputError("convergence diagnostics need at least three iterates");
    }
    DecayReport report;
    for (std::size_t k = 1; k < iterates.size(); ++k) {
        if (iterates[k].size() != iterates[0].size()) {
            throw InputError("iterates must have equal length");
        }
        double d = 0.0;
        for (std::size_t i = 0; i < iterates[k].size(); ++i) {
            d = std::max(d, std::abs(iterates[k][i] - iterates[k - 1][i]));
        }
        report.differences.push_back(d);
    }

    // Least-squares slope of log(difference) over the positive prefix.
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t k = 0; k < report.differences.size() && report.differences[k] > 0.0; ++k) {
        xs.push_back(static_cast<double>(k));
        ys.push_back(std::log(report.differences[k]));
    }
    if (xs.size() < 2) {
        // Nothing moved, or one step landed on an exact fixpoint.
        report.ratio = 0.0;
    } else {
        double mx = 0.0;
        double my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= static_cast<double>(xs.size());
        my /= static_cast<double>(xs.size());
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        report.ratio = std::exp(sxy / sxx);
        if (xs.size() < report.differences.size()) {
            report.ratio = std::min(report.ratio, 1.0 - 1e-12);
        }
    }
    report.contracting = report.ratio < 1.0;
    return report;
}

std::vector<std::size_t> quasi_static_runs(std::span<const double> series, double epsilon)
{
    std::vector<std::size_t> runs;
    std::size_t k = 0;
    while (k < series.size()) {
        double sum = series[k];
        double lo = series[k];
        double hi = series[k];
        std::size_t len = 1;
        while (k + len < series.size()) {
            const double x = series[k + len];
            const double mean = (sum + x) / static_cast<double>(len + 1);
            const double nlo = std::min(lo, x);
            const double nhi = std::max(hi, x);
            if (nhi - mean > epsilon || mean - nlo > epsilon) {
                break;
            }
            sum += x;
            lo = nlo;
            hi = nhi;
            ++len;
        }
        runs.push_back(len);
        k += len;
    }
    return runs;
}

HeatmapReport transition_heatmap(const DemandTrace& trace, const DemandLevelSet& levels, std::size_t window,
                                 std::size_t vm, std::size_t stride, double epsilon)
{
    trace.validate();
    if (vm >= trace.num_vms) {
        throw InputError("heatmap: VM id out of range");
    }
    if (window < 2 || stride == 0) {
        throw InputError("heatmap: window must be at least 2 and stride positive");
    }
    if (trace.num_slots <= window) {
        throw InputError("heatmap: trace of " + std::to_string(trace.num_slots) +
                         " slots is not longer than the window of " + std::to_string(window));
    }

    HeatmapReport report;
    SlidingWindowEstimator est(levels.size(), window);
    for (std::size_t t = 0; t < trace.num_slots; ++t) {
        est.push(levels.quantize(trace.at(vm, t)));
        if (t + 1 >= window && (t + 1 - window) % stride == 0) {
            report.window_end.push_back(t);
            report.matrices.push_back(est.estimate());
        }
    }

    const std::size_t nw = report.matrices.size();
    const std::size_t entries = levels.size() * levels.size();
    report.window_scores.assign(nw, 0.0);
    double longest_sum = 0.0;
    std::vector<double> series(nw);
    for (std::size_t e = 0; e < entries; ++e) {
        for (std::size_t w = 0; w < nw; ++w) {
            series[w] = report.matrices[w].data()[e];
        }
        const auto runs = quasi_static_runs(series, epsilon);
        std::size_t at = 0;
        std::size_t longest = 0;
        for (const std::size_t len : runs) {
            for (std::size_t w = at; w < at + len; ++w) {
                report.window_scores[w] += static_cast<double>(len);
            }
            at += len;
            longest = std::max(longest, len);
        }
        longest_sum += static_cast<double>(longest);
    }
    for (auto& s : report.window_scores) {
        s /= static_cast<double>(entries);
    }
    report.score = longest_sum / static_cast<double>(entries);
    return report;
}

std::string heatmap_to_csv(const HeatmapReport& report)
{
    std::ostringstream out;
    const std::size_t n = report.matrices.empty() ? 0 : report.matrices.front().size();
    out << "window_end";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out << ",p_" << i << '_' << j;
        }
    }
    out << ",score\n";
    char buf[32];
    for (std::size_t w = 0; w < report.matrices.size(); ++w) {
        out << report.window_end[w];
        for (const double p : report.matrices[w].data()) {
            std::snprintf(buf, sizeof buf, "%.6f", p);
            out << ',' << buf;
        }
        std::snprintf(buf, sizeof buf, "%.6f", report.window_scores[w]);
        out << ',' << buf << '\n';
    }
    return out.str();
}

} // namespace madvm
