#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "tunnelcat/errors.hpp"
#include "tunnelcat/quadrature.hpp"

namespace tunnelcat {

/// hbar and the particle mass. Both strictly positive; defaults to 1, 1.
class UnitSystem {
 public:
  UnitSystem() = default;
  UnitSystem(double hbar, double mass) : hbar_(hbar), mass_(mass) {
    if (!(hbar > 0.0) || !(mass > 0.0) || !std::isfinite(hbar) || !std::isfinite(mass)) {
      throw InvalidArgument("UnitSystem: hbar and mass must be finite and > 0");
    }
  }
  double hbar() const noexcept { return hbar_; }
  double mass() const noexcept { return mass_; }
  bool operator==(const UnitSystem&) const = default;

 private:
  double hbar_ = 1.0;
  double mass_ = 1.0;
};

struct Harmonic {
  double omega;
};
struct HarmonicPlusQuartic {
  double omega;
  double lambda;
};
struct DoubleWell {
  double lambda;
  double a;
};
/// V(x) = sum_k coefficients[k] x^k.
struct Polynomial {
  std::vector<double> coefficients;
};

using PotentialFamily = std::variant<Harmonic, HarmonicPlusQuartic, DoubleWell, Polynomial>;

struct PotentialSample {
  double V;
  double V1;
  double V2;
};

/// A potential from one of the supported families together with its unit
/// system. Immutable; all derivatives are analytic.
class Potential {
 public:
  explicit Potential(PotentialFamily family, UnitSystem units = {}) : family_(std::move(family)), units_(units) {
    std::visit([this](const auto& f) { init(f); }, family_);
  }

  const PotentialFamily& family() const noexcept { return family_; }
  const UnitSystem& units() const noexcept { return units_; }
  double hbar() const noexcept { return units_.hbar(); }
  double mass() const noexcept { return units_.mass(); }

  /// Ascending-power coefficients of V (families expanded).
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }

  std::string family_name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Harmonic>) return "harmonic";
          else if constexpr (std::is_same_v<T, HarmonicPlusQuartic>) return "harmonic_plus_quartic";
          else if constexpr (std::is_same_v<T, DoubleWell>) return "double_well";
          else return "polynomial";
        },
        family_);
  }

  PotentialSample eval(double x) const {
    return std::visit([this, x](const auto& f) { return eval_family(f, x); }, family_);
  }
  double value(double x) const { return eval(x).V; }
  double slope(double x) const { return eval(x).V1; }
  double curvature(double x) const { return eval(x).V2; }

  /// (V(x) - V(y)) / (x - y), evaluated in factored form so that V(x) - V(y)
  /// = (x - y) * secant(x, y) keeps full relative accuracy when x ~ y.
  /// Equals V'(x) for x == y.
  double secant(double x, double y) const {
    return std::visit([this, x, y](const auto& f) { return secant_family(f, x, y); }, family_);
  }

  /// secant(y + d, y) without rounding y + d; smooth in d at fixed y.
  double secant_offset(double y, double d) const {
    return std::visit([this, y, d](const auto& f) { return offset_family(f, y, d); }, family_);
  }

  /// V(x) - V(y) without cancellation.
  double difference(double x, double y) const { return (x - y) * secant(x, y); }

 private:
  void init(const Harmonic& f) {
    require(f.omega > 0.0, "Harmonic: omega must be > 0");
    k2_ = 0.5 * mass() * f.omega * f.omega;
    coeffs_ = {0.0, 0.0, k2_};
  }
  void init(const HarmonicPlusQuartic& f) {
    require(f.omega > 0.0, "HarmonicPlusQuartic: omega must be > 0");
    require(f.lambda > 0.0, "HarmonicPlusQuartic: lambda must be > 0");
    k2_ = 0.5 * mass() * f.omega * f.omega;
    coeffs_ = {0.0, 0.0, k2_, 0.0, f.lambda};
  }
  void init(const DoubleWell& f) {
    require(f.lambda > 0.0, "DoubleWell: lambda must be > 0");
    require(f.a > 0.0, "DoubleWell: a must be > 0");
    const double a2 = f.a * f.a;
    coeffs_ = {f.lambda * a2 * a2, 0.0, -2.0 * f.lambda * a2, 0.0, f.lambda};
  }
  void init(const Polynomial& f) {
    coeffs_ = f.coefficients;
    for (double c : coeffs_) require(std::isfinite(c), "Polynomial: coefficients must be finite");
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
    require(coeffs_.size() >= 3, "Polynomial: degree must be at least 2");
    require((coeffs_.size() - 1) % 2 == 0 && coeffs_.back() > 0.0,
            "Polynomial: must be bounded below (even degree, positive leading coefficient)");
    std::get<Polynomial>(family_).coefficients = coeffs_;
  }

  static void require(bool ok, const char* what) {
    if (!ok) throw InvalidArgument(what);
  }

  PotentialSample eval_family(const Harmonic&, double x) const { return {k2_ * x * x, 2.0 * k2_ * x, 2.0 * k2_}; }
  PotentialSample eval_family(const HarmonicPlusQuartic& f, double x) const {
    const double x2 = x * x;
    return {k2_ * x2 + f.lambda * x2 * x2, 2.0 * k2_ * x + 4.0 * f.lambda * x2 * x, 2.0 * k2_ + 12.0 * f.lambda * x2};
  }
  PotentialSample eval_family(const DoubleWell& f, double x) const {
    const double a2 = f.a * f.a;
    const double u = (x - f.a) * (x + f.a);
    return {f.lambda * u * u, 4.0 * f.lambda * x * u, 4.0 * f.lambda * (3.0 * x * x - a2)};
  }
  PotentialSample eval_family(const Polynomial&, double x) const {
    double v = 0.0, d1 = 0.0, d2 = 0.0;
    for (auto k = coeffs_.size(); k-- > 0;) {
      d2 = d2 * x + 2.0 * d1;
      d1 = d1 * x + v;
      v = v * x + coeffs_[k];
    }
    return {v, d1, d2};
  }

  double secant_family(const Harmonic&, double x, double y) const { return k2_ * (x + y); }
  double secant_family(const HarmonicPlusQuartic& f, double x, double y) const {
    return (x + y) * (k2_ + f.lambda * (x * x + y * y));
  }
  double secant_family(const DoubleWell& f, double x, double y) const {
    // Factored so that x, y near +/-a keep their relative accuracy.
    return f.lambda * (x + y) * ((x - f.a) * (x + f.a) + (y - f.a) * (y + f.a));
  }
  double secant_family(const Polynomial&, double x, double y) const {
    // sum_k c_k h_{k-1}(x, y), h_j the complete homogeneous polynomial of degree j.
    double h = 1.0;
    double ypow = 1.0;
    double sum = coeffs_.size() > 1 ? coeffs_[1] : 0.0;
    for (std::size_t k = 2; k < coeffs_.size(); ++k) {
      ypow *= y;
      h = x * h + ypow;
      sum += coeffs_[k] * h;
    }
    return sum;
  }

  double offset_family(const Harmonic&, double y, double d) const { return k2_ * (2.0 * y + d); }
  double offset_family(const HarmonicPlusQuartic& f, double y, double d) const {
    const double x = y + d;
    return (2.0 * y + d) * (k2_ + f.lambda * (x * x + y * y));
  }
  double offset_family(const DoubleWell& f, double y, double d) const {
    const double ym = y - f.a, yp = y + f.a;
    return f.lambda * (2.0 * y + d) * ((ym + d) * (yp + d) + ym * yp);
  }
  double offset_family(const Polynomial&, double y, double d) const {
    // Taylor coefficients about y by repeated synthetic division, then
    // sum_{k >= 1} b_k d^(k-1).
    std::vector<double> b = coeffs_;
    const std::size_t n = b.size();
    for (std::size_t j = 0; j + 1 < n; ++j) {
      for (std::size_t k = n - 1; k-- > j;) b[k] += y * b[k + 1];
    }
    double sum = 0.0;
    for (std::size_t k = n; k-- > 1;) sum = sum * d + b[k];
    return sum;
  }

  PotentialFamily family_;
  UnitSystem units_;
  std::vector<double> coeffs_;
  double k2_ = 0.0;
};

enum class CriticalKind { maximum, minimum };

struct CriticalPoint {
  double x;
  double V;
  double V2;
  CriticalKind kind;
};

/// A maximum of V (a well of -V) with the minima of V bounding it.
struct WellDescriptor {
  double x_m;
  double omega_m;
  double left_edge;
  double right_edge;
  double v_top;

  double half_width() const { return std::min(x_m - left_edge, right_edge - x_m); }
  bool contains(double x) const { return x > left_edge && x < right_edge; }
};

/// Interval guaranteed to contain every real critical point (Cauchy bound on
/// the roots of V').
inline double critical_point_bound(const Potential& pot) {
  const auto& c = pot.coefficients();
  const int d = pot.degree();
  const double lead = d * c[d];
  double m = 0.0;
  for (int k = 1; k < d; ++k) m = std::max(m, std::abs(k * c[k] / lead));
  return 1.0 + m;
}

/// All critical points of V in [lo, hi], ascending, located by a sign-change
/// scan of V' on `grid_points` uniform nodes and refined by bracketed root
/// finding plus a Newton polish.
inline std::vector<CriticalPoint> critical_points(const Potential& pot, double lo, double hi, int grid_points = 4096) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("critical_points: need a finite interval lo < hi");
  }
  if (grid_points < 8) throw InvalidArgument("critical_points: grid_points must be >= 8");
  const double step = (hi - lo) / (grid_points - 1);
  std::vector<double> xs(grid_points), d1(grid_points);
  double curvature_scale = 1.0;
  for (int i = 0; i < grid_points; ++i) {
    xs[i] = i + 1 == grid_points ? hi : lo + i * step;
    const auto s = pot.eval(xs[i]);
    d1[i] = s.V1;
    curvature_scale = std::max(curvature_scale, std::abs(s.V2));
  }

  auto polish = [&pot](double x, double a, double b) {
    for (int it = 0; it < 3; ++it) {
      const auto s = pot.eval(x);
      if (s.V1 == 0.0 || s.V2 == 0.0) break;
      const double nx = x - s.V1 / s.V2;
      if (!(nx >= a && nx <= b) || std::abs(pot.slope(nx)) >= std::abs(s.V1)) break;
      x = nx;
    }
    return x;
  };

  std::vector<double> roots;
  for (int i = 0; i < grid_points; ++i) {
    if (d1[i] == 0.0) {
      roots.push_back(polish(xs[i], xs[std::max(0, i - 1)], xs[std::min(grid_points - 1, i + 1)]));
    } else if (i > 0 && d1[i - 1] != 0.0 && (d1[i - 1] > 0.0) != (d1[i] > 0.0)) {
      const double r = find_root_bracketed([&pot](double x) { return pot.slope(x); }, xs[i - 1], xs[i]);
      roots.push_back(polish(r, xs[i - 1], xs[i]));
    }
  }

  std::vector<CriticalPoint> out;
  for (double r : roots) {
    const auto s = pot.eval(r);
    if (std::abs(s.V2) < 1e-9 * curvature_scale) {
      std::ostringstream msg;
      msg << "degenerate critical point (V' = V'' = 0) near x = " << r;
      throw DegenerateCriticalPoint(msg.str(), r);
    }
    out.push_back({r, s.V, s.V2, s.V2 < 0.0 ? CriticalKind::maximum : CriticalKind::minimum});
  }
  return out;
}

/// Critical structure of a potential: every critical point on the real line
/// and the wells of -V built from them.
struct Landscape {
  std::vector<CriticalPoint> points;
  std::vector<WellDescriptor> wells;

  const WellDescriptor* well_containing(double x) const {
    for (const auto& w : wells) {
      if (w.contains(x)) return &w;
    }
    return nullptr;
  }
};

inline std::vector<WellDescriptor> wells_from(const Potential& pot, const std::vector<CriticalPoint>& pts) {
  std::vector<WellDescriptor> wells;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].kind != CriticalKind::maximum) continue;
    WellDescriptor w;
    w.x_m = pts[i].x;
    w.omega_m = std::sqrt(-pts[i].V2 / pot.mass());
    w.v_top = pts[i].V;
    w.left_edge = (i > 0 && pts[i - 1].kind == CriticalKind::minimum) ? pts[i - 1].x : -inf;
    w.right_edge = (i + 1 < pts.size() && pts[i + 1].kind == CriticalKind::minimum) ? pts[i + 1].x : inf;
    wells.push_back(w);
  }
  return wells;
}

inline Landscape analyze(const Potential& pot, int grid_points = 4096) {
  const double r = critical_point_bound(pot);
  Landscape land;
  land.points = critical_points(pot, -r, r, grid_points);
  land.wells = wells_from(pot, land.points);
  return land;
}

/// Global minimum of V.
inline double lowest_value(const Potential& pot) {
  const double r = critical_point_bound(pot) + 1.0;
  double v = std::numeric_limits<double>::infinity();
  for (const auto& c : critical_points(pot, -r, r)) v = std::min(v, c.V);
  return v;
}

/// Largest |x| with V(x) <= level (0 if none). Beyond the critical point
/// bound V is monotone, so the outermost crossing is a bracketed root.
inline double level_radius(const Potential& pot, double level) {
  const double r0 = critical_point_bound(pot) + 1.0;
  auto g = [&](double x) { return pot.value(x) - level; };
  double radius = 0.0;
  constexpr int grid = 4096;
  for (int i = 0; i <= grid; ++i) {
    const double x = -r0 + 2.0 * r0 * i / grid;
    if (g(x) <= 0.0) radius = std::max(radius, std::abs(x));
  }
  for (double dir : {-1.0, 1.0}) {
    const double inner = dir * r0;
    if (g(inner) > 0.0) continue;
    double outer = 2.0 * inner;
    while (g(outer) <= 0.0) outer *= 2.0;
    radius = std::max(radius, std::abs(find_root_bracketed(g, inner, outer)));
  }
  return radius;
}

/// Every strict local maximum of V inside [lo, hi], with omega_m and the
/// bounding minima of V (searched over the whole real line, so edges lying
/// outside the interval are still reported).
inline std::vector<WellDescriptor> find_wells(const Potential& pot, double lo, double hi, int grid_points = 4096) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("find_wells: need a finite interval lo < hi");
  }
  const double r = critical_point_bound(pot);
  const auto pts = critical_points(pot, std::min(lo, -r), std::max(hi, r), grid_points);
  std::vector<WellDescriptor> out;
  for (const auto& w : wells_from(pot, pts)) {
    if (w.x_m >= lo && w.x_m <= hi) out.push_back(w);
  }
  return out;
}

/// String-keyed configuration mapping (values are the raw text of the config file).
using ConfigMap = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline double parse_number(const ConfigMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw InvalidArgument("missing key '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (it->second.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("key '" + key + "': not a number: '" + it->second + "'");
  }
}

inline std::vector<double> parse_list(const std::string& key, std::string text) {
  std::replace(text.begin(), text.end(), '[', ' ');
  std::replace(text.begin(), text.end(), ']', ' ');
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("key '" + key + "': bad list element '" + tok + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Builds a potential from the keys family, omega, lambda, a, coefficients
/// (ascending powers), hbar and mass.
inline Potential potential_from_config(const ConfigMap& m) {
  auto it = m.find("family");
  if (it == m.end()) throw InvalidArgument("missing key 'family'");
  const double hbar = m.count("hbar") ? detail::parse_number(m, "hbar") : 1.0;
  const double mass = m.count("mass") ? detail::parse_number(m, "mass") : 1.0;
  const UnitSystem units(hbar, mass);
  const std::string& fam = it->second;
  if (fam == "harmonic") return Potential(Harmonic{detail::parse_number(m, "omega")}, units);
  if (fam == "harmonic_plus_quartic") {
    return Potential(HarmonicPlusQuartic{detail::parse_number(m, "omega"), detail::parse_number(m, "lambda")}, units);
  }
  if (fam == "double_well") {
    return Potential(DoubleWell{detail::parse_number(m, "lambda"), detail::parse_number(m, "a")}, units);
  }
  if (fam == "polynomial") {
    auto c = m.find("coefficients");
    if (c == m.end()) throw InvalidArgument("missing key 'coefficients'");
    return Potential(Polynomial{detail::parse_list("coefficients", c->second)}, units);
  }
  throw InvalidArgument("key 'family': unknown potential family '" + fam + "'");
}

/// Inverse of potential_from_config (numbers printed with round-trip precision).
inline ConfigMap potential_to_config(const Potential& pot) {
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  ConfigMap m;
  m["family"] = pot.family_name();
  m["hbar"] = num(pot.hbar());
  m["mass"] = num(pot.mass());
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Harmonic>) {
          m["omega"] = num(f.omega);
        } else if constexpr (std::is_same_v<T, HarmonicPlusQuartic>) {
          m["omega"] = num(f.omega);
          m["lambda"] = num(f.lambda);
        } else if constexpr (std::is_same_v<T, DoubleWell>) {
          m["lambda"] = num(f.lambda);
          m["a"] = num(f.a);
        } else {
          std::string list = "[";
          for (std::size_t i = 0; i < f.coefficients.size(); ++i) {
            if (i) list += ", ";
            list += num(f.coefficients[i]);
          }
          m["coefficients"] = list + "]";
        }
      },
      pot.family());
  return m;
}

}  // namespace tunnelcat
