#include "stablesem/correlations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre half-rules (6, 12 and 20 points) for the bivariate normal integrand.
constexpr std::array<std::array<double, 10>, 3> kGaussW{{
    {0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
    {0.4717533638651177e-01, 0.1069393259953183, 0.1600783285433464, 0.2031674267230659, 0.2334925365383547,
     0.2491470458134029},
    {0.1761400713915212e-01, 0.4060142980038694e-01, 0.6267204833410906e-01, 0.8327674157670475e-01,
     0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
     0.1527533871307259},
}};
constexpr std::array<std::array<double, 10>, 3> kGaussX{{
    {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970},
    {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050, -0.5873179542866171, -0.3678314989981802,
     -0.1252334085114692},
    {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188, -0.7463319064601508,
     -0.6360536807265150, -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
     -0.7652652113349733e-01},
}};

// Upper orthant P(X > dh, Y > dk), after Genz (2004), "Numerical computation of rectangular
// bivariate and trivariate normal and t probabilities".
double upper_orthant(double dh, double dk, double r)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    int ng = 0;
    int lg = 3;
    if (std::abs(r) >= 0.3) {
        ng = std::abs(r) < 0.75 ? 1 : 2;
        lg = std::abs(r) < 0.75 ? 6 : 10;
    }
    const auto& w = kGaussW[ng];
    const auto& x = kGaussX[ng];

    double h = dh;
    double k = dk;
    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r);
        for (int i = 0; i < lg; ++i) {
            double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
            bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
            bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        return bvn * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k);
    }

    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (std::abs(r) < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        bvn = a * std::exp(-(bs / as + hk) / 2.0) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (hk > -160.0) {
            const double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * normal_cdf(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (int i = 0; i < lg; ++i) {
            double xs = (a * (x[i] + 1.0)) * (a * (x[i] + 1.0));
            double rs = std::sqrt(1.0 - xs);
            bvn += a * w[i] *
                   (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs -
                    std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
            xs = as * (-x[i] + 1.0) * (-x[i] + 1.0) / 4.0;
            rs = std::sqrt(1.0 - xs);
            bvn += a * w[i] * std::exp(-(bs / xs + hk) / 2.0) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / two_pi;
    }
    if (r > 0.0) bvn += normal_cdf(-std::max(h, k));
    if (r < 0.0) bvn = -bvn + std::max(0.0, normal_cdf(-h) - normal_cdf(-k));
    return bvn;
}

std::vector<int> category_codes(std::span<const double> codes, int categories)
{
    std::vector<int> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const double v = codes[i];
        const auto k = static_cast<int>(std::lround(v));
        if (!(std::abs(v - k) < 1e-9) || k < 1 || k > categories) {
            throw InputError(fmt::format("ordinal code {} outside 1..{}", v, categories), {i});
        }
        out[i] = k;
    }
    return out;
}

CorrelationEstimate maximise_in_rho(const auto& negative_loglik)
{
    constexpr int bits = 40;
    std::uintmax_t iterations = 200;
    const auto [rho, value] =
        boost::math::tools::brent_find_minima(negative_loglik, -kRhoBound, kRhoBound, bits, iterations);
    if (iterations >= 200 || !std::isfinite(value)) {
        throw EstimationError("correlation likelihood search did not converge", rho);
    }
    CorrelationEstimate out{rho, false};
    if (std::abs(rho) > kRhoBound - 1e-5) {
        out.rho = std::copysign(kRhoBound, rho);
        out.at_boundary = true;
    }
    return out;
}

} // namespace

int Dataset::find(const std::string& name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const
{
    Dataset out;
    out.columns.reserve(columns.size());
    for (const auto& col : columns) {
        Column c{col.name, col.type, {}};
        c.values.reserve(rows.size());
        for (auto r : rows) c.values.push_back(col.values.at(r));
        out.columns.push_back(std::move(c));
    }
    return out;
}

void Dataset::validate() const
{
    const auto n = rows();
    for (const auto& col : columns) {
        if (col.values.size() != n) throw InputError(fmt::format("column '{}' has a ragged length", col.name));
        std::vector<std::size_t> bad;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = col.values[i];
            if (!std::isfinite(v)) {
                bad.push_back(i);
            } else if (col.type.is_ordinal()) {
                const auto k = std::lround(v);
                if (std::abs(v - static_cast<double>(k)) > 1e-9 || k < 1 || k > col.type.categories) bad.push_back(i);
            }
        }
        if (!bad.empty()) {
            throw InputError(fmt::format("column '{}' has {} invalid or missing cells", col.name, bad.size()),
                             std::move(bad));
        }
    }
}

double ThresholdVector::lower(int k) const
{
    return k <= 1 ? -kInf : tau[k - 2];
}

double ThresholdVector::upper(int k) const
{
    return k >= categories() ? kInf : tau[k - 1];
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p)
{
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double bivariate_normal_cdf(double h, double k, double rho)
{
    if (h == -kInf || k == -kInf) return 0.0;
    if (h == kInf) return normal_cdf(k);
    if (k == kInf) return normal_cdf(h);
    return std::clamp(upper_orthant(-h, -k, rho), 0.0, 1.0);
}

double bivariate_normal_rectangle(double a1, double b1, double a2, double b2, double rho)
{
    const double p = bivariate_normal_cdf(b1, b2, rho) - bivariate_normal_cdf(a1, b2, rho) -
                     bivariate_normal_cdf(b1, a2, rho) + bivariate_normal_cdf(a1, a2, rho);
    return std::max(p, 0.0);
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw InputError("pearson: columns differ in length");
    if (x.size() < 3) throw DegenerateColumnError("pearson: need at least 3 observations");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateColumnError("pearson: zero-variance column");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ThresholdVector estimate_thresholds(std::span<const double> codes, int categories)
{
    if (categories < 2) throw DegenerateColumnError("ordinal column needs at least 2 categories");
    const auto k = category_codes(codes, categories);
    std::vector<double> counts(categories, 0.0);
    for (int c : k) counts[c - 1] += 1.0;
    const auto observed = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
    if (observed < 2) throw DegenerateColumnError("ordinal column has a single observed category");
    for (auto& c : counts) {
        if (c == 0.0) c = 0.5;
    }
    double total = 0.0;
    for (double c : counts) total += c;

    ThresholdVector out;
    double cumulative = 0.0;
    for (int j = 0; j + 1 < categories; ++j) {
        cumulative += counts[j];
        out.tau.push_back(normal_quantile(cumulative / total));
    }
    return out;
}

CorrelationEstimate polychoric(std::span<const double> x, int x_categories, std::span<const double> y,
                               int y_categories)
{
    if (x.size() != y.size()) throw InputError("polychoric: columns differ in length");
    const auto tx = estimate_thresholds(x, x_categories);
    const auto ty = estimate_thresholds(y, y_categories);
    const auto kx = category_codes(x, x_categories);
    const auto ky = category_codes(y, y_categories);

    Matrix table = Matrix::Zero(x_categories, y_categories);
    for (std::size_t i = 0; i < kx.size(); ++i) table(kx[i] - 1, ky[i] - 1) += 1.0;

    auto negative_loglik = [&](double rho) {
        double ll = 0.0;
        for (int a = 1; a <= x_categories; ++a) {
            for (int b = 1; b <= y_categories; ++b) {
                const double n = table(a - 1, b - 1);
                if (n == 0.0) continue;
                const double p = bivariate_normal_rectangle(tx.lower(a), tx.upper(a), ty.lower(b), ty.upper(b), rho);
                ll += n * std::log(std::max(p, 1e-300));
            }
        }
        return -ll;
    };
    return maximise_in_rho(negative_loglik);
}

CorrelationEstimate polyserial(std::span<const double> continuous, std::span<const double> ordinal, int categories)
{
    if (continuous.size() != ordinal.size()) throw InputError("polyserial: columns differ in length");
    const auto n = continuous.size();
    if (n < 3) throw DegenerateColumnError("polyserial: need at least 3 observations");
    double mean = 0.0;
    for (double v : continuous) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : continuous) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) throw DegenerateColumnError("polyserial: zero-variance continuous column");

    const auto t = estimate_thresholds(ordinal, categories);
    const auto k = category_codes(ordinal, categories);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (continuous[i] - mean) / sd;

    auto negative_loglik = [&](double rho) {
        const double s = std::sqrt(1.0 - rho * rho);
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = t.lower(k[i]);
            const double hi = t.upper(k[i]);
            const double p_hi = hi == kInf ? 1.0 : normal_cdf((hi - rho * z[i]) / s);
            const double p_lo = lo == -kInf ? 0.0 : normal_cdf((lo - rho * z[i]) / s);
            ll += std::log(std::max(p_hi - p_lo, 1e-300));
        }
        return -ll;
    };
    return maximise_in_rho(negative_loglik);
}

Matrix nearest_correlation_pd(const Matrix& a, double floor)
{
    Matrix current = 0.5 * (a + a.transpose());
    double clip = floor;
    for (int iter = 0; iter < 64; ++iter) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(current);
        if (eig.eigenvalues().minCoeff() >= floor) return current;
        const Vector clipped = eig.eigenvalues().cwiseMax(clip);
        Matrix rebuilt = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        const Vector scale = rebuilt.diagonal().cwiseSqrt().cwiseInverse();
        current = scale.asDiagonal() * rebuilt * scale.asDiagonal();
        current = 0.5 * (current + current.transpose());
        current.diagonal().setOnes();
        clip *= 2.0;
    }
    return current;
}

CorrelationMatrixResult mixed_correlation_matrix(const Dataset& d, const CorrelationOptions& options)
{
    d.validate();
    const auto p = static_cast<Eigen::Index>(d.cols());
    CorrelationMatrixResult out;
    const bool all_continuous =
        std::none_of(d.columns.begin(), d.columns.end(), [](const Column& c) { return c.type.is_ordinal(); });

    if (all_continuous && options.prefer_covariance) {
        const auto n = static_cast<Eigen::Index>(d.rows());
        if (n < 3) throw DegenerateColumnError("covariance: need at least 3 observations");
        Matrix x(n, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            x.col(j) = Eigen::Map<const Vector>(d.columns[j].values.data(), n);
        }
        const Matrix centered = x.rowwise() - x.colwise().mean();
        out.S = centered.transpose() * centered / static_cast<double>(n - 1);
        out.kind = MatrixKind::covariance;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!(out.S(j, j) > 0.0)) {
                throw DegenerateColumnError(fmt::format("column '{}': zero variance", d.columns[j].name));
            }
        }
    } else {
        out.S = Matrix::Identity(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = i + 1; j < p; ++j) {
                const auto& a = d.columns[i];
                const auto& b = d.columns[j];
                CorrelationEstimate est;
                try {
                    if (!a.type.is_ordinal() && !b.type.is_ordinal()) {
                        est.rho = pearson(a.values, b.values);
                    } else if (a.type.is_ordinal() && b.type.is_ordinal()) {
                        est = polychoric(a.values, a.type.categories, b.values, b.type.categories);
                    } else if (a.type.is_ordinal()) {
                        est = polyserial(b.values, a.values, a.type.categories);
                    } else {
                        est = polyserial(a.values, b.values, b.type.categories);
                    }
                } catch (const EstimationError& e) {
                    throw EstimationError(fmt::format("columns '{}' / '{}': {}", a.name, b.name, e.what()),
                                          e.last_iterate());
                } catch (const DegenerateColumnError& e) {
                    throw DegenerateColumnError(fmt::format("columns '{}' / '{}': {}", a.name, b.name, e.what()));
                } catch (const InputError& e) {
                    throw InputError(fmt::format("columns '{}' / '{}': {}", a.name, b.name, e.what()), e.rows());
                }
                if (est.at_boundary) out.boundary_pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
                out.S(i, j) = est.rho;
                out.S(j, i) = est.rho;
            }
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(out.S, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = p > 0 ? eig.eigenvalues().minCoeff() : 0.0;
    if (p > 0 && out.min_eigenvalue < options.eigenvalue_floor) {
        out.repaired = true;
        if (out.kind == MatrixKind::correlation) {
            out.S = nearest_correlation_pd(out.S, options.eigenvalue_floor);
        } else {
            Eigen::SelfAdjointEigenSolver<Matrix> full(out.S);
            out.S = full.eigenvectors() * full.eigenvalues().cwiseMax(options.eigenvalue_floor).asDiagonal() *
                    full.eigenvectors().transpose();
        }
        Eigen::SelfAdjointEigenSolver<Matrix> after(out.S, Eigen::EigenvaluesOnly);
        out.min_eigenvalue = after.eigenvalues().minCoeff();
    }
    return out;
}

} // namespace stablesem
