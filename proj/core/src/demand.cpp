#include "madvm/demand.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "madvm/errors.hpp"
#include "rng.hpp"

namespace madvm {

namespace {

// Quantization slack so that a demand printed with finite precision still
// lands on the level it was generated from.
constexpr double kQuantizeSlack = 1e-9;

} // namespace

DemandLevelSet::DemandLevelSet(std::vector<double> values) : values_(std::move(values))
{
    if (values_.size() < 2) {
        throw InputError("demand level set needs at least two levels");
    }
    if (!(values_.front() >= 0.0)) {
        throw InputError("lowest demand level must be >= 0");
    }
    for (std::size_t k = 1; k < values_.size(); ++k) {
        if (!(values_[k] > values_[k - 1])) {
            throw InputError("demand levels must be strictly increasing");
        }
    }
}

DemandLevelSet DemandLevelSet::uniform(std::size_t count, double cap_multiple)
{
    if (count < 2) {
        throw InputError("demand level set needs at least two levels");
    }
    if (!(cap_multiple > 0.0)) {
        throw InputError("cap_multiple must be positive");
    }
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k) {
        v[k] = static_cast<double>(k) / static_cast<double>(count - 1) * cap_multiple;
    }
    return DemandLevelSet(std::move(v));
}

LevelIndex DemandLevelSet::quantize(double raw) const
{
    if (!(raw >= 0.0)) {
        throw InputError("cannot quantize negative demand " + std::to_string(raw));
    }
    auto it = std::lower_bound(values_.begin(), values_.end(), raw - kQuantizeSlack);
    if (it == values_.end()) {
        return values_.size() - 1;
    }
    return static_cast<LevelIndex>(it - values_.begin());
}

bool is_row_stochastic(std::span<const double> row_major, std::size_t n, double tol)
{
    if (n == 0 || row_major.size() != n * n) {
        return false;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = row_major[j * n + i];
            if (!(p >= 0.0 && p <= 1.0)) {
                return false;
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) {
            return false;
        }
    }
    return true;
}

DemandChain::DemandChain(std::size_t num_levels, std::vector<double> row_major)
    : n_(num_levels), p_(std::move(row_major))
{
    if (!is_row_stochastic(p_, n_)) {
        throw InputError("transition matrix is not row-stochastic");
    }
}

DemandChain DemandChain::identity(std::size_t num_levels)
{
    std::vector<double> p(num_levels * num_levels, 0.0);
    for (std::size_t i = 0; i < num_levels; ++i) {
        p[i * num_levels + i] = 1.0;
    }
    return DemandChain(num_levels, std::move(p));
}

DemandChain DemandChain::uniform(std::size_t num_levels)
{
    return DemandChain(num_levels,
                       std::vector<double>(num_levels * num_levels, 1.0 / static_cast<double>(num_levels)));
}

DemandChain DemandChain::from_rows(const std::vector<std::vector<double>>& rows)
{
    const std::size_t n = rows.size();
    std::vector<double> p;
    p.reserve(n * n);
    for (const auto& r : rows) {
        if (r.size() != n) {
            throw InputError("transition matrix must be square");
        }
        p.insert(p.end(), r.begin(), r.end());
    }
    return DemandChain(n, std::move(p));
}

std::vector<std::vector<double>> DemandChain::rows() const
{
    std::vector<std::vector<double>> out(n_);
    for (std::size_t j = 0; j < n_; ++j) {
        out[j].assign(p_.begin() + static_cast<std::ptrdiff_t>(j * n_),
                      p_.begin() + static_cast<std::ptrdiff_t>((j + 1) * n_));
    }
    return out;
}

DemandChain DemandChain::lazy() const
{
    std::vector<double> p(p_.size());
    for (std::size_t j = 0; j < n_; ++j) {
        for (std::size_t i = 0; i < n_; ++i) {
            p[j * n_ + i] = 0.5 * p_[j * n_ + i] + (i == j ? 0.5 : 0.0);
        }
    }
    return DemandChain(n_, std::move(p));
}

SlidingWindowEstimator::SlidingWindowEstimator(std::size_t num_levels, std::size_t window_slots)
    : n_(num_levels), window_(window_slots), transitions_(num_levels * num_levels, 0), visits_(num_levels, 0)
{
    if (num_levels < 2) {
        throw InputError("estimator needs at least two levels");
    }
    if (window_slots < 2) {
        throw InputError("sliding window must span at least two slots");
    }
}

void SlidingWindowEstimator::push(LevelIndex level)
{
    if (level >= n_) {
        throw InputError("observed level " + std::to_string(level) + " out of range");
    }
    if (!buffer_.empty()) {
        const LevelIndex prev = buffer_.back();
        ++transitions_[prev * n_ + level];
        ++visits_[prev];
    }
    buffer_.push_back(level);
    if (buffer_.size() > window_) {
        const LevelIndex from = buffer_[0];
        const LevelIndex to = buffer_[1];
        --transitions_[from * n_ + to];
        --visits_[from];
        buffer_.pop_front();
    }
}

DemandChain SlidingWindowEstimator::estimate() const
{
    std::vector<double> p(n_ * n_);
    const double uniform = 1.0 / static_cast<double>(n_);
    for (std::size_t j = 0; j < n_; ++j) {
        const std::uint32_t visits = visits_[j];
        for (std::size_t i = 0; i < n_; ++i) {
            p[j * n_ + i] = visits == 0
                ? uniform
                : static_cast<double>(transitions_[j * n_ + i]) / static_cast<double>(visits);
        }
    }
    return DemandChain(n_, std::move(p));
}

DemandChain SlidingWindowEstimator::observe(LevelIndex level)
{
    push(level);
    return estimate();
}

bool SlidingWindowEstimator::counts_consistent() const
{
    if (buffer_.size() > window_) {
        return false;
    }
    std::vector<std::uint32_t> t(n_ * n_, 0);
    std::vector<std::uint32_t> v(n_, 0);
    for (std::size_t k = 1; k < buffer_.size(); ++k) {
        ++t[buffer_[k - 1] * n_ + buffer_[k]];
        ++v[buffer_[k - 1]];
    }
    return t == transitions_ && v == visits_;
}

Distribution indicator(std::size_t size, LevelIndex at)
{
    if (at >= size) {
        throw InputError("indicator position out of range");
    }
    Distribution d(size, 0.0);
    d[at] = 1.0;
    return d;
}

StationaryResult stationary_distribution(const DemandChain& chain, const Distribution& start,
                                         double tol, std::size_t max_iter)
{
    const std::size_t n = chain.size();
    if (!is_row_stochastic(chain.data(), n)) {
        throw InputError("stationary_distribution: chain is not row-stochastic");
    }
    if (start.size() != n) {
        throw InputError("stationary_distribution: start has wrong length");
    }
    double mass = 0.0;
    for (double x : start) {
        if (!(x >= 0.0)) {
            throw InputError("stationary_distribution: start has negative mass");
        }
        mass += x;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
        throw InputError("stationary_distribution: start does not sum to 1");
    }
    if (max_iter == 0) {
        max_iter = 10 * n * 1000;
    }

    StationaryResult out;
    Distribution pi = start;
    Distribution next(n);
    for (std::size_t it = 0;; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = pi[j];
            if (w == 0.0) {
                continue;
            }
            const auto row = chain.row(j);
            for (std::size_t i = 0; i < n; ++i) {
                next[i] += w * row[i];
            }
        }
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            residual = std::max(residual, std::abs(next[i] - pi[i]));
        }
        out.iterations = it + 1;
        out.residual = residual;
        if (residual <= tol) {
            out.converged = true;
            break;
        }
        if (it + 1 >= max_iter) {
            break;
        }
        pi.swap(next);
    }
    out.distribution = std::move(pi);
    return out;
}

double expected_demand(const Distribution& pi, const DemandLevelSet& levels)
{
    if (pi.size() != levels.size()) {
        throw InputError("distribution and level set sizes differ");
    }
    double e = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        e += levels[i] * pi[i];
    }
    return e;
}

FeatureState feature_state(const Distribution& pi, const DemandLevelSet& levels, PmId location)
{
    double mass = 0.0;
    for (double x : pi) {
        if (!(x >= -1e-12)) {
            throw InputError("feature_state: negative probability");
        }
        mass += x;
    }
    if (std::abs(mass - 1.0) > 1e-6) {
        throw InputError("feature_state: distribution does not sum to 1");
    }
    const double e = std::max(0.0, expected_demand(pi, levels));
    return FeatureState{levels.quantize(e), location};
}

DemandTrace::DemandTrace(std::size_t vms, std::size_t slots)
    : num_vms(vms), num_slots(slots), demands(vms * slots, 0.0)
{
}

void DemandTrace::validate() const
{
    if (num_vms == 0 || num_slots == 0) {
        throw InputError("trace must contain at least one VM and one slot");
    }
    if (demands.size() != num_vms * num_slots) {
        throw InputError("trace is not rectangular");
    }
    for (std::size_t k = 0; k < demands.size(); ++k) {
        if (!(demands[k] >= 0.0) || !std::isfinite(demands[k])) {
            throw InputError("trace demand for vm " + std::to_string(k % num_vms) + " slot " +
                             std::to_string(k / num_vms) + " is negative or not finite");
        }
    }
}

DemandTrace synthesize_trace(const std::vector<DemandChain>& ground_truth,
                             const std::vector<RegimeSwitch>& schedule,
                             std::span<const LevelIndex> start_levels,
                             const DemandLevelSet& levels, std::size_t num_slots,
                             std::uint64_t seed)
{
    if (ground_truth.empty()) {
        throw InputError("synthesize_trace: no chains given");
    }
    const std::size_t vms = ground_truth.size();
    const std::size_t n = levels.size();
    auto check_chains = [&](const std::vector<DemandChain>& chains) {
        if (chains.size() != vms) {
            throw InputError("synthesize_trace: need one chain per VM");
        }
        for (const auto& c : chains) {
            if (c.size() != n) {
                throw InputError("synthesize_trace: chain size does not match level count");
            }
        }
    };
    check_chains(ground_truth);
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        check_chains(schedule[k].chains);
        if (k > 0 && schedule[k].slot <= schedule[k - 1].slot) {
            throw InputError("synthesize_trace: regime schedule slots must be strictly increasing");
        }
    }
    if (!start_levels.empty() && start_levels.size() != vms) {
        throw InputError("synthesize_trace: need one start level per VM");
    }
    if (num_slots == 0) {
        throw InputError("synthesize_trace: num_slots must be positive");
    }

    detail::Rng rng(seed);
    DemandTrace trace(vms, num_slots);
    std::vector<LevelIndex> current(vms, 0);
    for (std::size_t l = 0; l < vms; ++l) {
        if (!start_levels.empty()) {
            if (start_levels[l] >= n) {
                throw InputError("synthesize_trace: start level out of range");
            }
            current[l] = start_levels[l];
        }
        trace.at(l, 0) = levels[current[l]];
    }

    const std::vector<DemandChain>* active = &ground_truth;
    std::size_t next_switch = 0;
    for (std::size_t t = 1; t < num_slots; ++t) {
        while (next_switch < schedule.size() && schedule[next_switch].slot <= t) {
            active = &schedule[next_switch].chains;
            ++next_switch;
        }
        for (std::size_t l = 0; l < vms; ++l) {
            const auto row = (*active)[l].row(current[l]);
            const auto certain = std::find(row.begin(), row.end(), 1.0);
            if (certain != row.end()) {
                current[l] = static_cast<LevelIndex>(certain - row.begin());
            } else {
                const double u = rng.uniform();
                double acc = 0.0;
                LevelIndex pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += row[i];
                    if (u < acc) {
                        pick = i;
                        break;
                    }
                }
                // Guard against round-off landing on a zero-probability tail.
                while (row[pick] == 0.0 && pick > 0) {
                    --pick;
                }
                current[l] = pick;
            }
            trace.at(l, t) = levels[current[l]];
        }
    }
    return trace;
}

DemandChain sticky_chain(std::size_t num_levels, LevelIndex home, double stickiness, double decay)
{
    if (home >= num_levels) {
        throw InputError("sticky_chain: home level out of range");
    }
    if (!(stickiness >= 0.0 && stickiness <= 1.0) || !(decay > 0.0)) {
        throw InputError("sticky_chain: stickiness must lie in [0,1] and decay must be positive");
    }
    std::vector<double> q(num_levels);
    double z = 0.0;
    for (std::size_t i = 0; i < num_levels; ++i) {
        const double d = static_cast<double>(i > home ? i - home : home - i);
        q[i] = std::pow(decay, d);
        z += q[i];
    }
    std::vector<double> p(num_levels * num_levels);
    for (std::size_t j = 0; j < num_levels; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < num_levels; ++i) {
            p[j * num_levels + i] = (1.0 - stickiness) * q[i] / z + (i == j ? stickiness : 0.0);
            sum += p[j * num_levels + i];
        }
        for (std::size_t i = 0; i < num_levels; ++i) {
            p[j * num_levels + i] /= sum;
        }
    }
    return DemandChain(num_levels, std::move(p));
}

} // namespace madvm
