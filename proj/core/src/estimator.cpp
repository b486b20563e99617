#include "stablesem/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "stablesem/errors.hpp"
#include "stablesem/optimizer.hpp"

namespace stablesem {

namespace {

enum class Block { B, Gamma, Phi, Psi, LambdaX, LambdaY, ThetaDelta, ThetaEpsilon };

// Coordinates in the reticular form Sigma = L T V T' L' + diag(theta), T = (I - A)^-1.
enum class RamTarget { A, V, L, Theta };

struct Slot {
    Block block;
    Eigen::Index row;
    Eigen::Index col;
    bool log_scale;
    RamTarget target;
    Eigen::Index ram_row;
    Eigen::Index ram_col;  // unused for Theta
};

Matrix& block_matrix(SemParameters& p, Block b)
{
    switch (b) {
    case Block::B: return p.B;
    case Block::Gamma: return p.Gamma;
    case Block::Phi: return p.Phi;
    case Block::Psi: return p.Psi;
    case Block::LambdaX: return p.LambdaX;
    case Block::LambdaY: return p.LambdaY;
    case Block::ThetaDelta: return p.ThetaDelta;
    case Block::ThetaEpsilon: return p.ThetaEpsilon;
    }
    return p.B;
}

const Matrix& block_matrix(const SemParameters& p, Block b)
{
    return block_matrix(const_cast<SemParameters&>(p), b);
}

// Visits every entry of every block with its reticular-form coordinates.
template <typename Visitor>
void for_each_entry(const SemParameters& p, Visitor&& visit)
{
    const auto& lay = p.layout;
    const auto& endo = lay.endogenous;
    const auto& exo = lay.exogenous;
    const auto m = static_cast<Eigen::Index>(endo.size());
    const auto n = static_cast<Eigen::Index>(exo.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) visit(Block::B, i, j, p.free.B(i, j), RamTarget::A, endo[i], endo[j]);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            visit(Block::Gamma, i, j, p.free.Gamma(i, j), RamTarget::A, endo[i], exo[j]);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) visit(Block::Phi, i, j, p.free.Phi(i, j), RamTarget::V, exo[i], exo[j]);
    }
    for (Eigen::Index i = 0; i < m; ++i) visit(Block::Psi, i, i, p.free.Psi(i, i), RamTarget::V, endo[i], endo[i]);
    for (Eigen::Index r = 0; r < p.LambdaY.rows(); ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
            visit(Block::LambdaY, r, c, p.free.LambdaY(r, c), RamTarget::L, lay.y_indicators[r], endo[c]);
        }
    }
    for (Eigen::Index r = 0; r < p.LambdaX.rows(); ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            visit(Block::LambdaX, r, c, p.free.LambdaX(r, c), RamTarget::L, lay.x_indicators[r], exo[c]);
        }
    }
    for (Eigen::Index r = 0; r < p.ThetaEpsilon.rows(); ++r) {
        visit(Block::ThetaEpsilon, r, r, p.free.ThetaEpsilon(r, r), RamTarget::Theta, lay.y_indicators[r], 0);
    }
    for (Eigen::Index r = 0; r < p.ThetaDelta.rows(); ++r) {
        visit(Block::ThetaDelta, r, r, p.free.ThetaDelta(r, r), RamTarget::Theta, lay.x_indicators[r], 0);
    }
}

bool is_variance(Block b, Eigen::Index row, Eigen::Index col)
{
    switch (b) {
    case Block::Phi: return row == col;
    case Block::Psi:
    case Block::ThetaDelta:
    case Block::ThetaEpsilon: return true;
    default: return false;
    }
}

std::vector<Slot> free_slots(const SemParameters& p)
{
    std::vector<Slot> slots;
    for_each_entry(p, [&](Block b, Eigen::Index i, Eigen::Index j, bool free, RamTarget t, Eigen::Index rr,
                          Eigen::Index rc) {
        if (free) slots.push_back({b, i, j, is_variance(b, i, j), t, rr, rc});
    });
    return slots;
}

void set_slot(SemParameters& p, const Slot& s, double value)
{
    auto& mat = block_matrix(p, s.block);
    mat(s.row, s.col) = value;
    if (s.block == Block::Phi) mat(s.col, s.row) = value;
}

// Fixed part of the reticular form plus the free-slot map; evaluates F_ML and its gradient.
class RamEvaluator {
public:
    RamEvaluator(const SemParameters& pattern, const Matrix& sample)
        : slots_(free_slots(pattern)), sample_(sample)
    {
        const auto k = static_cast<Eigen::Index>(pattern.layout.endogenous.size() + pattern.layout.exogenous.size());
        const auto p = static_cast<Eigen::Index>(pattern.layout.y_indicators.size() + pattern.layout.x_indicators.size());
        if (sample.rows() != p || sample.cols() != p) throw NumericDomainError("sample matrix does not match the model");
        a0_ = Matrix::Zero(k, k);
        v0_ = Matrix::Zero(k, k);
        l0_ = Matrix::Zero(p, k);
        theta0_ = Vector::Zero(p);
        for_each_entry(pattern, [&](Block b, Eigen::Index i, Eigen::Index j, bool, RamTarget t, Eigen::Index rr,
                                    Eigen::Index rc) {
            const double v = block_matrix(pattern, b)(i, j);
            store(t, rr, rc, v);
        });
        Eigen::LLT<Matrix> llt(sample_);
        if (llt.info() != Eigen::Success) throw NumericDomainError("S is not positive definite");
        logdet_sample_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }

    [[nodiscard]] const std::vector<Slot>& slots() const { return slots_; }

    double operator()(const Vector& u, Vector* gradient)
    {
        a_ = a0_;
        v_ = v0_;
        l_ = l0_;
        theta_ = theta0_;
        for (std::size_t s = 0; s < slots_.size(); ++s) {
            const auto& slot = slots_[s];
            const double value = slot.log_scale ? std::exp(u[static_cast<Eigen::Index>(s)]) : u[static_cast<Eigen::Index>(s)];
            store_current(slot.target, slot.ram_row, slot.ram_col, value);
        }
        const auto k = a_.rows();
        const Matrix i_minus_a = Matrix::Identity(k, k) - a_;
        Eigen::PartialPivLU<Matrix> lu(i_minus_a);
        t_ = lu.inverse();
        if (!t_.allFinite()) return std::numeric_limits<double>::infinity();
        c_ = t_ * v_ * t_.transpose();
        sigma_ = l_ * c_ * l_.transpose();
        sigma_.diagonal() += theta_;

        Eigen::LLT<Matrix> llt(sigma_);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        const auto p = sigma_.rows();
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        if (!std::isfinite(logdet)) return std::numeric_limits<double>::infinity();
        const Matrix sigma_inv = llt.solve(Matrix::Identity(p, p));
        const Matrix sigma_inv_s = sigma_inv * sample_;
        const double value = logdet + sigma_inv_s.trace() - logdet_sample_ - static_cast<double>(p);

        if (gradient != nullptr) {
            // dF = tr(W dSigma), W = Sigma^-1 - Sigma^-1 S Sigma^-1
            const Matrix w = sigma_inv - sigma_inv_s * sigma_inv;
            const Matrix wl = w * l_;
            const Matrix g_l = 2.0 * wl * c_;
            const Matrix m = l_.transpose() * wl;
            const Matrix g_v = t_.transpose() * m * t_;
            const Matrix cmt = c_ * m * t_;
            gradient->resize(static_cast<Eigen::Index>(slots_.size()));
            for (std::size_t s = 0; s < slots_.size(); ++s) {
                const auto& slot = slots_[s];
                double g = 0.0;
                double value_s = 0.0;
                switch (slot.target) {
                case RamTarget::A:
                    g = 2.0 * cmt(slot.ram_col, slot.ram_row);
                    value_s = a_(slot.ram_row, slot.ram_col);
                    break;
                case RamTarget::V:
                    g = (slot.ram_row == slot.ram_col ? 1.0 : 2.0) * g_v(slot.ram_row, slot.ram_col);
                    value_s = v_(slot.ram_row, slot.ram_col);
                    break;
                case RamTarget::L:
                    g = g_l(slot.ram_row, slot.ram_col);
                    value_s = l_(slot.ram_row, slot.ram_col);
                    break;
                case RamTarget::Theta:
                    g = w(slot.ram_row, slot.ram_row);
                    value_s = theta_[slot.ram_row];
                    break;
                }
                (*gradient)[static_cast<Eigen::Index>(s)] = slot.log_scale ? g * value_s : g;
            }
        }
        return value;
    }

private:
    void store(RamTarget t, Eigen::Index r, Eigen::Index c, double v)
    {
        switch (t) {
        case RamTarget::A: a0_(r, c) = v; break;
        case RamTarget::V: v0_(r, c) = v; v0_(c, r) = v; break;
        case RamTarget::L: l0_(r, c) = v; break;
        case RamTarget::Theta: theta0_[r] = v; break;
        }
    }

    void store_current(RamTarget t, Eigen::Index r, Eigen::Index c, double v)
    {
        switch (t) {
        case RamTarget::A: a_(r, c) = v; break;
        case RamTarget::V: v_(r, c) = v; v_(c, r) = v; break;
        case RamTarget::L: l_(r, c) = v; break;
        case RamTarget::Theta: theta_[r] = v; break;
        }
    }

    std::vector<Slot> slots_;
    Matrix sample_;
    double logdet_sample_ = 0.0;
    Matrix a0_, v0_, l0_;
    Vector theta0_;
    Matrix a_, v_, l_, t_, c_, sigma_;
    Vector theta_;
};

// Row of the indicator that scales a latent: its fixed nonzero loading, else its first free one.
Eigen::Index reference_row(const SemParameters& p, bool endogenous, Eigen::Index position)
{
    const auto& lambda = endogenous ? p.LambdaY : p.LambdaX;
    const auto& mask = endogenous ? p.free.LambdaY : p.free.LambdaX;
    Eigen::Index chosen = -1;
    for (Eigen::Index r = 0; r < lambda.rows(); ++r) {
        if (!mask(r, position) && lambda(r, position) != 0.0) return r;
        if (chosen < 0 && mask(r, position)) chosen = r;
    }
    return chosen;
}

double node_reference_variance(const SemParameters& p, bool endogenous, Eigen::Index position, const Matrix& sample)
{
    const auto chosen = reference_row(p, endogenous, position);
    if (chosen < 0) return 1.0;
    const auto ind = (endogenous ? p.layout.y_indicators : p.layout.x_indicators)[chosen];
    return sample(ind, ind);
}

// Loading implied by the covariance with the reference indicator when the latent carries half of
// the reference indicator's variance; sign follows the data.
double loading_start(const SemParameters& p, bool endogenous, Eigen::Index row, Eigen::Index position,
                     const Matrix& sample)
{
    const auto ref = reference_row(p, endogenous, position);
    const auto& lambda = endogenous ? p.LambdaY : p.LambdaX;
    const auto& mask = endogenous ? p.free.LambdaY : p.free.LambdaX;
    if (ref < 0 || ref == row || mask(ref, position)) return 1.0;
    const auto& indicators = endogenous ? p.layout.y_indicators : p.layout.x_indicators;
    const auto i = indicators[row];
    const auto r = indicators[ref];
    const double latent_variance = 0.5 * sample(r, r);
    if (!(latent_variance > 0.0)) return 1.0;
    const double v = sample(i, r) / (lambda(ref, position) * latent_variance);
    if (!std::isfinite(v) || std::abs(v) < 0.05) return 1.0;
    return std::clamp(v, -5.0, 5.0);
}

FitResult run_fit(const SemParameters& start, const Matrix& sample, long n_samples, const FitOptions& options)
{
    RamEvaluator evaluator(start, sample);
    Objective objective;
    if (options.finite_difference_gradient) {
        objective = [&evaluator](const Vector& u, Vector* g) {
            const double v = evaluator(u, nullptr);
            if (g != nullptr && std::isfinite(v)) {
                *g = central_difference_gradient([&evaluator](const Vector& x, Vector*) { return evaluator(x, nullptr); },
                                                 u, 1e-6);
            }
            return v;
        };
    } else {
        objective = [&evaluator](const Vector& u, Vector* g) { return evaluator(u, g); };
    }

    MinimizeOptions mo;
    mo.max_iterations = options.max_iterations;
    mo.gradient_tolerance = options.gradient_tolerance;
    mo.relative_tolerance = options.relative_tolerance;
    const auto result = minimize_bfgs(objective, pack_free_parameters(start), mo);

    FitResult out;
    out.theta_hat = unpack_free_parameters(start, result.x);
    out.f_ml = std::isfinite(result.value) ? std::max(0.0, result.value) : result.value;
    out.chi_square = chi_square(out.f_ml, n_samples);
    out.t = free_parameter_count(start);
    out.converged = result.converged && std::isfinite(result.value);
    out.iterations = result.iterations;
    if (result.hit_infeasible) out.condition_flags.insert(FitFlag::non_pd_encountered);
    if (result.reason == StopReason::line_search) out.condition_flags.insert(FitFlag::line_search_stalled);
    const auto slots = evaluator.slots();
    for (std::size_t s = 0; s < slots.size(); ++s) {
        if (slots[s].log_scale && std::exp(result.x[static_cast<Eigen::Index>(s)]) < options.boundary_variance) {
            out.condition_flags.insert(FitFlag::boundary_hit);
        }
    }
    return out;
}

} // namespace

std::string to_string(FitFlag flag)
{
    switch (flag) {
    case FitFlag::non_pd_encountered: return "non_pd_encountered";
    case FitFlag::boundary_hit: return "boundary_hit";
    case FitFlag::line_search_stalled: return "line_search_stalled";
    }
    return "unknown";
}

Vector pack_free_parameters(const SemParameters& theta)
{
    const auto slots = free_slots(theta);
    Vector u(static_cast<Eigen::Index>(slots.size()));
    for (std::size_t s = 0; s < slots.size(); ++s) {
        const double v = block_matrix(theta, slots[s].block)(slots[s].row, slots[s].col);
        u[static_cast<Eigen::Index>(s)] = slots[s].log_scale ? std::log(std::max(v, 1e-300)) : v;
    }
    return u;
}

SemParameters unpack_free_parameters(const SemParameters& pattern, const Vector& packed)
{
    SemParameters out = pattern;
    const auto slots = free_slots(pattern);
    for (std::size_t s = 0; s < slots.size(); ++s) {
        const double u = packed[static_cast<Eigen::Index>(s)];
        set_slot(out, slots[s], slots[s].log_scale ? std::exp(u) : u);
    }
    return out;
}

double fml_packed(const SemParameters& pattern, const Vector& packed, const Matrix& sample, Vector* gradient)
{
    RamEvaluator evaluator(pattern, sample);
    return evaluator(packed, gradient);
}

SemParameters start_values(const SemParameters& pattern, const Matrix& sample)
{
    SemParameters out = pattern;
    const auto slots = free_slots(pattern);
    const auto floor_half = [](double v) { return std::max(0.05, 0.5 * v); };
    for (const auto& s : slots) {
        double v = 0.0;
        switch (s.block) {
        case Block::B:
        case Block::Gamma: v = 0.1; break;
        case Block::LambdaX: v = loading_start(pattern, false, s.row, s.col, sample); break;
        case Block::LambdaY: v = loading_start(pattern, true, s.row, s.col, sample); break;
        case Block::Phi: v = s.row == s.col ? floor_half(node_reference_variance(pattern, false, s.row, sample)) : 0.0; break;
        case Block::Psi: v = floor_half(node_reference_variance(pattern, true, s.row, sample)); break;
        case Block::ThetaEpsilon: {
            const auto ind = pattern.layout.y_indicators[s.row];
            v = floor_half(sample(ind, ind));
            break;
        }
        case Block::ThetaDelta: {
            const auto ind = pattern.layout.x_indicators[s.row];
            v = floor_half(sample(ind, ind));
            break;
        }
        }
        set_slot(out, s, v);
    }
    return out;
}

FitResult fit(const SemParameters& pattern, const Matrix& sample, long n_samples, const FitOptions& options)
{
    if (n_samples < 2) throw SpecError("fit: need N >= 2");
    return run_fit(start_values(pattern, sample), sample, n_samples, options);
}

FitResult fit_from(const SemParameters& start, const Matrix& sample, long n_samples, const FitOptions& options)
{
    if (n_samples < 2) throw SpecError("fit: need N >= 2");
    return run_fit(start, sample, n_samples, options);
}

GradientCheck gradient_check(const SemParameters& theta, const Matrix& sample)
{
    RamEvaluator evaluator(theta, sample);
    const Vector u = pack_free_parameters(theta);
    const Objective f = [&evaluator](const Vector& x, Vector*) { return evaluator(x, nullptr); };
    const Vector coarse = central_difference_gradient(f, u, 1e-4);
    const Vector fine = central_difference_gradient(f, u, 1e-6);
    Vector analytic;
    evaluator(u, &analytic);

    GradientCheck out;
    if (u.size() == 0) return out;
    out.step_disagreement = (coarse - fine).lpNorm<Eigen::Infinity>();
    out.analytic_deviation = (analytic - fine).lpNorm<Eigen::Infinity>();
    out.gradient_norm = analytic.lpNorm<Eigen::Infinity>();
    return out;
}

std::size_t FitCache::KeyHash::operator()(const Key& k) const noexcept
{
    // FNV-1a over the adjacency bits, then the subset index
    std::size_t h = 1469598103934665603ULL;
    for (auto b : k.adjacency) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    h ^= static_cast<std::size_t>(k.subset) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

std::shared_ptr<const FitResult> FitCache::find(const Key& key) const
{
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    ++hits_;
    return it->second;
}

std::shared_ptr<const FitResult> FitCache::insert(const Key& key, FitResult value)
{
    auto entry = std::make_shared<const FitResult>(std::move(value));
    std::unique_lock lock(mutex_);
    const auto [it, inserted] = entries_.emplace(key, std::move(entry));
    return it->second;
}

std::size_t FitCache::size() const
{
    std::shared_lock lock(mutex_);
    return entries_.size();
}

} // namespace stablesem
