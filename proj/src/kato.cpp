#include "stabledrift/kato.hpp"

#include "stabledrift/errors.hpp"
#include "stabledrift/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sdrift::kato {
namespace {

using std::numbers::pi;

// Cell edges of a nearest-node table.
std::vector<double> table_edges(const DriftComponent& c) {
    const auto& n = c.nodes;
    std::vector<double> e;
    if (n.size() == 1) return {n[0] - 0.5, n[0] + 0.5};
    e.push_back(n[0] - 0.5 * (n[1] - n[0]));
    for (std::size_t i = 0; i + 1 < n.size(); ++i) e.push_back(0.5 * (n[i] + n[i + 1]));
    e.push_back(n.back() + 0.5 * (n.back() - n[n.size() - 2]));
    return e;
}

double table_value(const DriftComponent& c, double x) {
    const auto e = table_edges(c);
    if (x < e.front() || x >= e.back()) return 0.0;
    const auto it = std::upper_bound(e.begin(), e.end(), x);
    return c.values[static_cast<std::size_t>(it - e.begin()) - 1];
}

void eval_component(const DriftComponent& c, int d, std::span<const double> x, std::span<double> out) {
    const double w = c.weight;
    switch (c.kind) {
        case DriftKind::constant:
            for (int i = 0; i < d; ++i) out[i] += w * c.vec[i];
            break;
        case DriftKind::sinusoidal:
            for (int i = 0; i < d; ++i) out[i] += w * c.amplitude * std::sin(c.frequency * x[i] + c.phase);
            break;
        case DriftKind::gaussian_bump: {
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) r2 += (x[i] - c.center[i]) * (x[i] - c.center[i]);
            const double g = w * c.amplitude * std::exp(-0.5 * r2 / (c.sigma * c.sigma));
            for (int i = 0; i < d; ++i) out[i] += g * c.vec[i];
            break;
        }
        case DriftKind::power_singularity: {
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) r2 += (x[i] - c.center[i]) * (x[i] - c.center[i]);
            const double r = std::sqrt(r2);
            if (r == 0.0) {
                if (c.reg_radius > 0.0) break;  // capped field: direction undefined, take 0
                throw DomainError("power-singularity drift evaluated at its singular point");
            }
            const double mag = w * c.amplitude * std::pow(std::max(r, c.reg_radius), -c.gamma);
            for (int i = 0; i < d; ++i) out[i] += mag * (x[i] - c.center[i]) / r;
            break;
        }
        case DriftKind::user_table:
            out[0] += w * table_value(c, x[0]);
            break;
        case DriftKind::sum:
            break;
    }
}

std::optional<double> component_sup(const DriftComponent& c, int d) {
    const double w = std::fabs(c.weight);
    switch (c.kind) {
        case DriftKind::constant: {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += c.vec[i] * c.vec[i];
            return w * std::sqrt(s);
        }
        case DriftKind::sinusoidal:
            return w * std::fabs(c.amplitude) * std::sqrt(static_cast<double>(d));
        case DriftKind::gaussian_bump:
            return w * std::fabs(c.amplitude);
        case DriftKind::power_singularity:
            if (c.reg_radius > 0.0) return w * std::fabs(c.amplitude) * std::pow(c.reg_radius, -c.gamma);
            return std::nullopt;
        case DriftKind::user_table: {
            double m = 0.0;
            for (double v : c.values) m = std::max(m, std::fabs(v));
            return w * m;
        }
        case DriftKind::sum:
            return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

std::string kind_name(DriftKind k) {
    switch (k) {
        case DriftKind::constant: return "constant";
        case DriftKind::sinusoidal: return "sinusoidal";
        case DriftKind::gaussian_bump: return "gaussian_bump";
        case DriftKind::power_singularity: return "power_singularity";
        case DriftKind::user_table: return "user_table";
        case DriftKind::sum: return "sum";
    }
    return "unknown";
}

DriftField DriftField::zero(int d) { return DriftField(d); }

DriftField DriftField::constant(int d, Point c) {
    DriftField f(d);
    DriftComponent k;
    k.kind = DriftKind::constant;
    k.vec = c;
    f.parts_.push_back(k);
    return f;
}

DriftField DriftField::sinusoidal(int d, double amp, double freq, double phase) {
    DriftField f(d);
    DriftComponent k;
    k.kind = DriftKind::sinusoidal;
    k.amplitude = amp;
    k.frequency = freq;
    k.phase = phase;
    f.parts_.push_back(k);
    return f;
}

DriftField DriftField::gaussian_bump(int d, double amp, double sigma, Point center, Point direction) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_bump drift needs sigma > 0");
    double n = 0.0;
    for (int i = 0; i < d; ++i) n += direction[i] * direction[i];
    if (n == 0.0) throw ConfigError("gaussian_bump drift needs a nonzero direction");
    DriftField f(d);
    DriftComponent k;
    k.kind = DriftKind::gaussian_bump;
    k.amplitude = amp;
    k.sigma = sigma;
    k.center = center;
    for (int i = 0; i < 3; ++i) k.vec[i] = i < d ? direction[i] / std::sqrt(n) : 0.0;
    f.parts_.push_back(k);
    return f;
}

DriftField DriftField::power_singularity(int d, double amp, double gamma, Point center, double reg_radius) {
    if (gamma < 0.0) throw ConfigError("power_singularity drift needs gamma >= 0");
    if (reg_radius < 0.0) throw ConfigError("power_singularity regularization radius must be >= 0");
    DriftField f(d);
    DriftComponent k;
    k.kind = DriftKind::power_singularity;
    k.amplitude = amp;
    k.gamma = gamma;
    k.center = center;
    k.reg_radius = reg_radius;
    f.parts_.push_back(k);
    return f;
}

DriftField DriftField::user_table(std::vector<double> nodes, std::vector<double> values) {
    if (nodes.empty() || nodes.size() != values.size())
        throw ConfigError("user_table drift needs matching, non-empty node and value lists");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1])) throw ConfigError("user_table drift nodes must be strictly increasing");
    for (double v : values)
        if (!std::isfinite(v)) throw ConfigError("user_table drift values must be finite");
    DriftField f(1);
    DriftComponent k;
    k.kind = DriftKind::user_table;
    k.nodes = std::move(nodes);
    k.values = std::move(values);
    f.parts_.push_back(k);
    return f;
}

DriftField DriftField::user_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open drift table '" + path + "'");
    std::vector<double> xs, bs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double x, b;
        if (!(ls >> x >> b)) {
            if (xs.empty() && lineno == 1) continue;  // header row
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'x,b'");
        }
        xs.push_back(x);
        bs.push_back(b);
    }
    return user_table(std::move(xs), std::move(bs));
}

DriftField DriftField::operator+(const DriftField& o) const {
    if (o.d_ != d_) throw ConfigError("cannot add drift fields of different dimension");
    DriftField f(d_);
    f.parts_ = parts_;
    f.parts_.insert(f.parts_.end(), o.parts_.begin(), o.parts_.end());
    return f;
}

DriftField DriftField::scaled(double c) const {
    DriftField f = *this;
    for (auto& p : f.parts_) p.weight *= c;
    return f;
}

DriftField DriftField::with_regularization(double radius) const {
    DriftField f = *this;
    for (auto& p : f.parts_)
        if (p.kind == DriftKind::power_singularity) p.reg_radius = radius;
    return f;
}

DriftKind DriftField::kind() const {
    if (parts_.size() == 1) return parts_[0].kind;
    if (parts_.empty()) return DriftKind::constant;
    return DriftKind::sum;
}

bool DriftField::is_zero() const {
    for (const auto& p : parts_) {
        if (p.weight == 0.0) continue;
        switch (p.kind) {
            case DriftKind::constant:
                if (p.vec[0] != 0.0 || p.vec[1] != 0.0 || p.vec[2] != 0.0) return false;
                break;
            case DriftKind::user_table:
                for (double v : p.values)
                    if (v != 0.0) return false;
                break;
            default:
                if (p.amplitude != 0.0) return false;
        }
    }
    return true;
}

void DriftField::eval(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < d_; ++i) out[i] = 0.0;
    for (const auto& p : parts_) eval_component(p, d_, x, out);
}

double DriftField::eval_1d(double x) const {
    double out[3] = {0.0, 0.0, 0.0};
    eval(std::span<const double>(&x, 1), std::span<double>(out, 3));
    return out[0];
}

double DriftField::magnitude(std::span<const double> x) const {
    double out[3] = {0.0, 0.0, 0.0};
    eval(x, std::span<double>(out, 3));
    return std::sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2]);
}

std::optional<double> DriftField::sup_bound() const {
    double s = 0.0;
    for (const auto& p : parts_) {
        const auto c = component_sup(p, d_);
        if (!c) return std::nullopt;
        s += *c;
    }
    return s;
}

std::optional<double> DriftField::support_radius() const {
    double r = 0.0;
    for (const auto& p : parts_) {
        if (p.weight == 0.0) continue;
        if (p.kind == DriftKind::user_table) {
            const auto e = table_edges(p);
            r = std::max({r, std::fabs(e.front()), std::fabs(e.back())});
        } else if (p.kind == DriftKind::constant && p.vec == Point{}) {
            continue;
        } else {
            return std::nullopt;
        }
    }
    return r;
}

std::optional<double> DriftField::singularity_exponent() const {
    std::optional<double> g;
    for (const auto& p : parts_)
        if (p.kind == DriftKind::power_singularity) g = std::max(g.value_or(0.0), p.gamma);
    return g;
}

std::optional<std::pair<double, double>> DriftField::regularization() const {
    for (const auto& p : parts_)
        if (p.kind == DriftKind::power_singularity && p.reg_radius > 0.0)
            return std::make_pair(std::fabs(p.weight * p.amplitude) * std::pow(p.reg_radius, -p.gamma), p.reg_radius);
    return std::nullopt;
}

std::vector<Point> DriftField::extremal_points() const {
    std::vector<Point> pts;
    for (const auto& p : parts_) {
        switch (p.kind) {
            case DriftKind::constant:
                pts.push_back({});
                break;
            case DriftKind::sinusoidal: {
                const double x = (0.5 * pi - p.phase) / p.frequency;
                Point a{}, b{};
                for (int i = 0; i < d_; ++i) {
                    a[i] = x;
                    b[i] = x + pi / p.frequency;
                }
                pts.push_back(a);
                pts.push_back(b);
                break;
            }
            case DriftKind::gaussian_bump:
            case DriftKind::power_singularity:
                pts.push_back(p.center);
                break;
            case DriftKind::user_table: {
                std::size_t k = 0;
                for (std::size_t i = 1; i < p.values.size(); ++i)
                    if (std::fabs(p.values[i]) > std::fabs(p.values[k])) k = i;
                pts.push_back({p.nodes[k], 0.0, 0.0});
                break;
            }
            case DriftKind::sum:
                break;
        }
    }
    return pts;
}

std::vector<Point> DriftField::singular_points() const {
    std::vector<Point> pts;
    for (const auto& p : parts_)
        if (p.kind == DriftKind::power_singularity && p.reg_radius == 0.0 && p.amplitude != 0.0) pts.push_back(p.center);
    return pts;
}

std::vector<double> DriftField::jump_points_1d() const {
    std::vector<double> j;
    for (const auto& p : parts_) {
        if (p.kind == DriftKind::user_table) {
            const auto e = table_edges(p);
            j.insert(j.end(), e.begin(), e.end());
        }
        if (p.kind == DriftKind::power_singularity && d_ == 1) j.push_back(p.center[0]);
    }
    std::sort(j.begin(), j.end());
    return j;
}

std::string DriftField::describe() const {
    if (parts_.empty()) return "0";
    std::ostringstream os;
    for (std::size_t n = 0; n < parts_.size(); ++n) {
        const auto& p = parts_[n];
        if (n) os << " + ";
        if (p.weight != 1.0) os << p.weight << "*";
        switch (p.kind) {
            case DriftKind::constant:
                os << "const(" << p.vec[0];
                for (int i = 1; i < d_; ++i) os << "," << p.vec[i];
                os << ")";
                break;
            case DriftKind::sinusoidal:
                os << p.amplitude << "*sin(" << p.frequency << "*x+" << p.phase << ")";
                break;
            case DriftKind::gaussian_bump:
                os << p.amplitude << "*gauss(sigma=" << p.sigma << ")";
                break;
            case DriftKind::power_singularity:
                os << p.amplitude << "*|x|^-" << p.gamma;
                if (p.reg_radius > 0.0) os << "[cap r=" << p.reg_radius << "]";
                break;
            case DriftKind::user_table:
                os << "table(" << p.nodes.size() << " nodes)";
                break;
            case DriftKind::sum:
                os << "sum";
                break;
        }
    }
    return os.str();
}

void check_admissible(const DriftField& b, const stable::StableParams& p) {
    for (const auto& c : b.components()) {
        if (c.kind == DriftKind::power_singularity && !(c.gamma < p.alpha - 1.0)) {
            std::ostringstream os;
            os << "power_singularity exponent gamma = " << c.gamma << " is not Kato-admissible (needs gamma < alpha - 1 = "
               << p.alpha - 1.0 << ")";
            throw DomainError(os.str());
        }
        if (c.kind == DriftKind::user_table && b.d() != 1) throw DomainError("user_table drifts are supported in d = 1 only");
    }
}

namespace {

// Breakpoints along the ray x + rho theta, rho in (0, R).
struct RayBreaks {
    std::vector<double> at;
    std::vector<double> singular;  // subset of `at` where |b| blows up
};

RayBreaks ray_breaks(const DriftField& b, std::span<const double> x, const Point& th, double R) {
    RayBreaks br;
    const int d = b.d();
    auto add_point = [&](const Point& c, bool singular) {
        double along = 0.0, perp2 = 0.0;
        for (int i = 0; i < d; ++i) along += (c[i] - x[i]) * th[i];
        for (int i = 0; i < d; ++i) {
            const double e = c[i] - x[i] - along * th[i];
            perp2 += e * e;
        }
        if (!(along > 1e-15 && along < R)) return;
        if (perp2 < 1e-20 + 0.01 * along * along) br.at.push_back(along);
        if (singular && perp2 < 1e-24) br.singular.push_back(along);
    };
    for (const auto& c : b.components()) {
        if (c.kind == DriftKind::power_singularity) add_point(c.center, c.reg_radius == 0.0);
        if (c.kind == DriftKind::gaussian_bump) add_point(c.center, false);
    }
    if (d == 1)
        for (double j : b.jump_points_1d()) {
            const double r = (j - x[0]) * th[0];
            if (r > 1e-15 && r < R) br.at.push_back(r);
        }
    std::sort(br.at.begin(), br.at.end());
    br.at.erase(std::unique(br.at.begin(), br.at.end()), br.at.end());
    return br;
}

// Zeros of sinusoidal components along x + rho theta, rho in (lo, hi). |b|
// has a kink there in d = 1 (harmless extra breaks otherwise).
std::vector<double> sine_zeros(const DriftField& b, std::span<const double> x, const Point& th, double lo, double hi) {
    std::vector<double> out;
    for (const auto& c : b.components()) {
        if (c.kind != DriftKind::sinusoidal || c.frequency == 0.0) continue;
        for (int i = 0; i < b.d(); ++i) {
            const double slope = c.frequency * th[i];
            if (slope == 0.0) continue;
            const double a0 = c.frequency * x[i] + c.phase;
            const double u = a0 + slope * lo, v = a0 + slope * hi;
            const double k0 = std::ceil(std::min(u, v) / std::numbers::pi), k1 = std::floor(std::max(u, v) / std::numbers::pi);
            if (k1 - k0 > 1e6) throw AccuracyError("too many sinusoid zeros on one ray segment");
            for (double k = k0; k <= k1; k += 1.0) {
                const double r = (k * std::numbers::pi - a0) / slope;
                if (r > lo && r < hi) out.push_back(r);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Ray integrands have kinks wherever a component of b changes sign, which
// stalls the double-exponential rule; adaptive Kronrod bisects them. Endpoint
// singularities go the other way round, so each rule backs up the other.
double piece(const std::function<double(double)>& f, double a, double b, double rel_tol, double abs_tol = 1e-300) {
    try {
        return quad::kronrod(f, a, b, rel_tol, 20);
    } catch (const AccuracyError&) {
        return quad::tanh_sinh(f, a, b, rel_tol, abs_tol);
    }
}

double ray_integral(const DriftField& b, const stable::StableParams& p, std::span<const double> x, const Point& th,
                    const std::function<double(double)>& w, double R, double rel_tol,
                    const std::vector<double>& w_breaks) {
    const int d = b.d();
    const double a = p.alpha;
    std::array<double, 3> y{};
    // |b| at base + t theta; the base is either x or a singular point on the ray,
    // so points near the singularity are resolved in absolute precision.
    auto mag_from = [&](std::span<const double> base, double t) {
        for (int i = 0; i < d; ++i) y[i] = base[i] + t * th[i];
        try {
            return b.magnitude(std::span<const double>(y.data(), d));
        } catch (const DomainError&) {
            return 0.0;  // landed exactly on a singular point: measure zero
        }
    };
    auto plain = [&](double rho) { return mag_from(x, rho) * std::pow(rho, a - 2.0) * w(rho); };
    const bool infinite = !std::isfinite(R);
    RayBreaks br = ray_breaks(b, x, th, infinite ? HUGE_VAL : R);
    for (double r : w_breaks)
        if (r > 0.0 && (infinite || r < R)) br.at.push_back(r);
    const double core_end = infinite ? std::max(1.0, br.at.empty() ? 1.0 : *std::max_element(br.at.begin(), br.at.end())) : R;
    for (double r : sine_zeros(b, x, th, 0.0, core_end)) br.at.push_back(r);
    std::sort(br.at.begin(), br.at.end());
    br.at.erase(std::unique(br.at.begin(), br.at.end()), br.at.end());
    auto is_singular = [&](double r) {
        return std::find(br.singular.begin(), br.singular.end(), r) != br.singular.end();
    };
    double first = br.at.empty() ? (infinite ? 1.0 : R) : br.at.front();
    if (!infinite) first = std::min(first, R);
    // [0, first] in u = rho^{alpha-1}
    const double beta = a - 1.0;
    auto hu = [&](double u) {
        const double rho = std::pow(u, 1.0 / beta);
        return mag_from(x, rho) * w(rho);
    };
    double total = piece(hu, 0.0, std::pow(first, beta), rel_tol) / beta;
    std::vector<double> pts{first};
    for (double r : br.at)
        if (r > first) pts.push_back(r);
    if (!infinite) pts.push_back(R);
    if (infinite && pts.back() < core_end) pts.push_back(core_end);
    if (infinite && is_singular(pts.back())) pts.push_back(2.0 * pts.back() + 1.0);

    auto anchored = [&](double s0, double sign, double len) {
        std::array<double, 3> base{};
        for (int i = 0; i < d; ++i) base[i] = x[i] + s0 * th[i];
        auto f = [&](double t) {
            const double rho = s0 + sign * t;
            return mag_from(std::span<const double>(base.data(), d), sign * t) * std::pow(rho, a - 2.0) * w(rho);
        };
        return quad::tanh_sinh(f, 0.0, len, rel_tol, 1e-300);
    };
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double pa = pts[i], pb = pts[i + 1];
        if (!(pb > pa)) continue;
        const bool sa = is_singular(pa), sb = is_singular(pb);
        if (!sa && !sb) {
            total += piece(plain, pa, pb, rel_tol);
            continue;
        }
        const double mid = 0.5 * (pa + pb);
        if (sa) total += anchored(pa, 1.0, (sb ? mid : pb) - pa);
        if (sb) total += anchored(pb, -1.0, pb - (sa ? mid : pa));
    }
    if (infinite) {
        // Doubling panels: |b| may have kinks all the way out (sinusoids).
        // Doubling panels split at sinusoid zeros. For bounded fields the
        // loop stops once sup|b| int_hi^inf rho^{alpha-2} w <= rel_tol |total|;
        // otherwise after two negligible panels.
        const auto bsup = b.sup_bound();
        auto envelope = [&](double rho) { return std::pow(rho, a - 2.0) * w(rho); };
        double a0 = pts.back();
        int small = 0;
        for (int k = 0; k < 200 && small < 2; ++k, a0 *= 2.0) {
            std::vector<double> cuts{a0};
            for (double r : sine_zeros(b, x, th, a0, 2.0 * a0)) cuts.push_back(r);
            cuts.push_back(2.0 * a0);
            double v = 0.0;
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
                v += piece(plain, cuts[i], cuts[i + 1], rel_tol, 1e-3 * rel_tol * std::fabs(total));
            total += v;
            if (bsup) {
                const double bound = *bsup * quad::exp_sinh(envelope, 2.0 * a0, 1e-6, 0.0);
                if (bound <= rel_tol * std::fabs(total)) break;
                continue;
            }
            small = std::fabs(v) <= 1e-3 * rel_tol * std::fabs(total) ? small + 1 : 0;
        }
    }
    return total;
}

// Exact integral for a pure d = 1 table: sum over cells of |b_i| int |x-y|^{alpha-2} dy.
double table_kato_integral(const DriftField& b, const stable::StableParams& p, double x, double r) {
    const double a = p.alpha;
    auto anti = [&](double u) {  // antiderivative of |u|^{alpha-2}
        return (u < 0 ? -1.0 : 1.0) * std::pow(std::fabs(u), a - 1.0) / (a - 1.0);
    };
    double total = 0.0;
    for (const auto& c : b.components()) {
        const auto e = table_edges(c);
        for (std::size_t i = 0; i + 1 < e.size(); ++i) {
            const double lo = std::max(e[i], x - r), hi = std::min(e[i + 1], x + r);
            if (hi > lo) total += std::fabs(c.weight * c.values[i]) * (anti(hi - x) - anti(lo - x));
        }
    }
    return total;
}

bool pure_table(const DriftField& b) {
    if (b.components().size() != 1) return false;
    return b.components()[0].kind == DriftKind::user_table;
}

}  // namespace

double singular_shell_integral(const DriftField& b, const stable::StableParams& p, std::span<const double> x,
                               const std::function<double(double)>& w, double R, double rel_tol,
                               const std::vector<double>& w_breaks) {
    if (b.is_zero()) return 0.0;
    const quad::SphereRule sph = quad::sphere_rule(b.d(), 32);
    double s = 0.0;
    for (std::size_t k = 0; k < sph.dirs.size(); ++k)
        s += sph.weights[k] * ray_integral(b, p, x, sph.dirs[k], w, R, rel_tol, w_breaks);
    return s;
}

double kato_integral(const DriftField& b, const stable::StableParams& p, std::span<const double> x, double r) {
    if (!(r > 0.0)) throw DomainError("Kato modulus requires r > 0");
    if (b.is_zero()) return 0.0;
    if (pure_table(b)) return table_kato_integral(b, p, x[0], r);
    return singular_shell_integral(b, p, x, [](double) { return 1.0; }, r, 1e-9);
}

std::vector<Point> default_probes(const DriftField& b) {
    std::vector<Point> pts{{}};
    for (int i = 0; i < b.d(); ++i) {
        Point e{};
        e[i] = 1.0;
        pts.push_back(e);
        e[i] = -1.0;
        pts.push_back(e);
    }
    return pts;
}

KatoEstimate kato_modulus(const DriftField& b, const stable::StableParams& p, double r, const std::vector<Point>& probes) {
    if (!(r > 0.0)) throw DomainError("Kato modulus requires r > 0");
    if (probes.empty()) throw DomainError("Kato modulus requires a non-empty probe set");
    check_admissible(b, p);
    KatoEstimate est;
    if (b.is_zero()) return est;
    const int d = b.d();
    auto value_at = [&](const Point& x) {
        ++est.evaluations;
        return kato_integral(b, p, std::span<const double>(x.data(), d), r);
    };
    std::vector<Point> all = probes;
    for (const Point& q : b.extremal_points()) all.push_back(q);
    double best = -1.0;
    for (const Point& q : all) {
        const double v = value_at(q);
        if (v > best) {
            best = v;
            est.argmax = q;
        }
    }
    // Pattern-search refinement around the probe argmax.
    double step = 0.5 * r;
    for (int level = 0; level < 4; ++level, step *= 0.5) {
        bool moved = true;
        for (int it = 0; it < 8 && moved; ++it) {
            moved = false;
            for (int i = 0; i < d; ++i)
                for (double sgn : {-1.0, 1.0}) {
                    Point q = est.argmax;
                    q[i] += sgn * step;
                    const double v = value_at(q);
                    if (v > best * (1.0 + 1e-12)) {
                        best = v;
                        est.argmax = q;
                        moved = true;
                    }
                }
        }
    }
    est.value = best;
    return est;
}

KatoModulusCurve kato_check(const DriftField& b, const stable::StableParams& p, std::vector<double> radii,
                            const std::vector<Point>& probes) {
    if (radii.size() < 3) throw DomainError("Kato decay fit needs at least 3 radii");
    std::sort(radii.begin(), radii.end(), std::greater<double>());
    KatoModulusCurve c;
    c.radii = radii;
    for (double r : radii) c.modulus.push_back(kato_modulus(b, p, r, probes).value);
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (c.modulus[i] > c.modulus[i - 1] * (1.0 + 1e-9)) c.monotone = false;
    c.decaying = c.modulus.back() <= 0.05 * c.modulus.front();
    bool positive = true;
    for (double m : c.modulus) positive = positive && m > 0.0;
    if (positive) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(radii.size());
        for (std::size_t i = 0; i < radii.size(); ++i) {
            const double lx = std::log(radii[i]), ly = std::log(c.modulus[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        c.decay_fit = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        c.fit_prefactor = std::exp((sy - c.decay_fit * sx) / n);
        c.fit_valid = true;
    }
    return c;
}

}  // namespace sdrift::kato
