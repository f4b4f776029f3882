#pragma once

// Invariant exterior algebra on 2-step nilmanifolds that fiber over a torus.
//
// A NilStructure fixes a global coframe theta^0..theta^{2n-1} (the first n
// are the "e"/alpha slots, the last n the "f"/beta slots), the exterior
// derivative of each coframe element as a constant 2-form, the action of an
// almost-complex structure J on the coframe (coefficients may be fields on
// the base), the symplectic form, and, for every axis of the base grid, the
// coordinate differential dx_axis written in the coframe. Forms carry
// ScalarField coefficients on the base grid, so a coefficient can only
// depend on base coordinates.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "torus_ma/grid.hpp"

namespace torus_ma {

class FormError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using MultiIndex = std::vector<int>;

/// Sorts idx in place and returns the permutation parity (+1/-1), or 0 if an
/// index repeats.
inline int sort_with_sign(MultiIndex& idx) {
  int sign = 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    for (std::size_t j = i; j > 0 && idx[j - 1] >= idx[j]; --j) {
      if (idx[j - 1] == idx[j]) return 0;
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
    }
  }
  return sign;
}

namespace detail {

// First partials of a coefficient along every base axis; an empty vector
// stands for the zero gradient.
using Gradient = std::vector<ScalarField>;

inline Gradient scaled(const Gradient& g, double s) {
  Gradient r = g;
  for (auto& f : r) f *= s;
  return r;
}

inline void accumulate(Gradient& into, const Gradient& g, double s) {
  if (g.empty()) return;
  if (into.empty()) {
    into = scaled(g, s);
    return;
  }
  for (std::size_t a = 0; a < g.size(); ++a) into[a].axpy(s, g[a]);
}

/// Gradient of a*b by the product rule.
inline Gradient product(const ScalarField& a, const Gradient& ga, const ScalarField& b, const Gradient& gb) {
  Gradient r;
  if (!ga.empty()) {
    r = ga;
    for (auto& f : r) f *= b;
  }
  if (!gb.empty()) {
    if (r.empty()) r.assign(gb.size(), ScalarField(a.grid()));
    for (std::size_t k = 0; k < gb.size(); ++k) r[k] += a * gb[k];
  }
  return r;
}

}  // namespace detail

/// Coefficients are point values; a term may also carry its exact first
/// partials, which exterior_derivative then uses instead of differentiating
/// the (possibly unresolved) product spectrally.
class InvariantForm {
 public:
  using Gradient = detail::Gradient;

  InvariantForm() = default;
  InvariantForm(int degree, TorusGrid grid) : degree_(degree), grid_(std::move(grid)) {
    if (degree < 0) throw FormError("negative form degree");
  }

  static InvariantForm scalar(const ScalarField& f) {
    InvariantForm r(0, f.grid());
    r.add_term({}, f);
    return r;
  }

  /// Constant-coefficient form from (index tuple, coefficient) pairs.
  static InvariantForm constant(const TorusGrid& grid, int degree,
                                const std::vector<std::pair<MultiIndex, double>>& terms) {
    InvariantForm r(degree, grid);
    for (const auto& [idx, c] : terms) r.add_term(idx, ScalarField(grid, c), Gradient{});
    return r;
  }

  int degree() const { return degree_; }
  const TorusGrid& grid() const { return grid_; }
  const std::map<MultiIndex, ScalarField>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Adds coeff * theta^{idx}; idx need not be sorted. The coefficient's
  /// partials are unknown.
  void add_term(MultiIndex idx, const ScalarField& coeff, double scale = 1.0) {
    add_impl(std::move(idx), coeff, nullptr, scale);
  }
  /// Same, with the exact partials of coeff.
  void add_term(MultiIndex idx, const ScalarField& coeff, const Gradient& grad, double scale = 1.0) {
    if (!grad.empty() && static_cast<int>(grad.size()) != grid_.dim())
      throw FormError("gradient needs one partial per base axis");
    add_impl(std::move(idx), coeff, &grad, scale);
  }

  ScalarField coefficient(const MultiIndex& sorted_idx) const {
    auto it = terms_.find(sorted_idx);
    return it == terms_.end() ? ScalarField(grid_) : it->second;
  }

  /// Known partials of a term's coefficient, or nullptr.
  const Gradient* gradient(const MultiIndex& sorted_idx) const {
    auto it = grads_.find(sorted_idx);
    return it == grads_.end() ? nullptr : &it->second;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& [idx, c] : terms_) m = std::max(m, c.max_abs());
    return m;
  }

  InvariantForm& operator+=(const InvariantForm& o) { return add_scaled(o, 1.0); }
  InvariantForm& operator-=(const InvariantForm& o) { return add_scaled(o, -1.0); }
  InvariantForm& operator*=(double s) {
    for (auto& [idx, c] : terms_) c *= s;
    for (auto& [idx, g] : grads_) g = detail::scaled(g, s);
    return *this;
  }
  InvariantForm& operator*=(const ScalarField& f) {
    if (!(f.grid() == grid_)) throw FormError("multiplier grid differs from form grid");
    for (auto& [idx, c] : terms_) c *= f;
    grads_.clear();
    return *this;
  }
  /// Multiplies by f whose partials are known.
  InvariantForm& multiply(const ScalarField& f, const Gradient& grad_f) {
    if (!(f.grid() == grid_)) throw FormError("multiplier grid differs from form grid");
    for (auto& [idx, g] : grads_) g = detail::product(terms_.at(idx), g, f, grad_f);
    for (auto& [idx, c] : terms_) c *= f;
    return *this;
  }

 private:
  void add_impl(MultiIndex idx, const ScalarField& coeff, const Gradient* grad, double scale) {
    if (static_cast<int>(idx.size()) != degree_) throw FormError("index tuple length != degree");
    if (!(coeff.grid() == grid_)) throw FormError("coefficient grid differs from form grid");
    const int sign = sort_with_sign(idx);
    if (sign == 0) return;
    const double s = sign * scale;
    auto it = terms_.find(idx);
    if (it == terms_.end()) {
      if (grad) grads_[idx] = detail::scaled(*grad, s);
      terms_.emplace(std::move(idx), s == 1.0 ? coeff : s * coeff);
      return;
    }
    it->second.axpy(s, coeff);
    auto git = grads_.find(idx);
    if (git == grads_.end()) return;
    if (grad)
      detail::accumulate(git->second, *grad, s);
    else
      grads_.erase(git);
  }

  InvariantForm& add_scaled(const InvariantForm& o, double s) {
    if (o.degree_ != degree_) throw FormError("adding forms of different degree");
    if (!(o.grid_ == grid_)) throw FormError("adding forms on different grids");
    for (const auto& [idx, c] : o.terms_) add_impl(idx, c, o.gradient(idx), s);
    return *this;
  }

  int degree_ = 0;
  TorusGrid grid_;
  std::map<MultiIndex, ScalarField> terms_;
  std::map<MultiIndex, Gradient> grads_;
};

inline InvariantForm operator+(InvariantForm a, const InvariantForm& b) { return a += b; }
inline InvariantForm operator-(InvariantForm a, const InvariantForm& b) { return a -= b; }
inline InvariantForm operator*(double s, InvariantForm a) { return a *= s; }
inline InvariantForm operator*(const ScalarField& f, InvariantForm a) { return a *= f; }

struct NilStructure {
  int n = 2;
  TorusGrid grid;
  std::vector<std::string> labels;
  std::vector<InvariantForm> d_table;             // d(theta^i), degree 2
  std::vector<InvariantForm> j_action;            // J(theta^i), degree 1
  std::vector<InvariantForm> base_differentials;  // dx_axis, degree 1
  InvariantForm omega;
  // +1 when Omega(., J.) is positive definite, -1 for the reversed structure.
  int compatibility_sign = 1;

  int rank() const { return 2 * n; }
};

inline InvariantForm wedge(const InvariantForm& a, const InvariantForm& b) {
  if (!(a.grid() == b.grid())) throw FormError("wedge of forms on different grids");
  InvariantForm r(a.degree() + b.degree(), a.grid());
  for (const auto& [ia, ca] : a.terms()) {
    for (const auto& [ib, cb] : b.terms()) {
      MultiIndex raw = ia;
      raw.insert(raw.end(), ib.begin(), ib.end());
      MultiIndex probe = raw;
      if (sort_with_sign(probe) == 0) continue;
      const auto* ga = a.gradient(ia);
      const auto* gb = b.gradient(ib);
      if (ga && gb)
        r.add_term(std::move(raw), ca * cb, detail::product(ca, *ga, cb, *gb));
      else
        r.add_term(std::move(raw), ca * cb);
    }
  }
  return r;
}

namespace detail {

inline void require_on_structure(const InvariantForm& a, const NilStructure& s) {
  if (!(a.grid() == s.grid))
    throw FormError("form coefficients live on a grid that is not the structure's base grid");
}

/// d(theta^{i_0} ^ ... ^ theta^{i_{p-1}}) with constant coefficients.
inline InvariantForm d_basis(const MultiIndex& idx, const NilStructure& s) {
  InvariantForm r(static_cast<int>(idx.size()) + 1, s.grid);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    InvariantForm left = InvariantForm::constant(s.grid, static_cast<int>(k),
                                                 {{MultiIndex(idx.begin(), idx.begin() + k), 1.0}});
    InvariantForm right = InvariantForm::constant(
        s.grid, static_cast<int>(idx.size() - k - 1), {{MultiIndex(idx.begin() + k + 1, idx.end()), 1.0}});
    InvariantForm piece = wedge(wedge(left, s.d_table.at(idx[k])), right);
    if (k % 2 == 1) piece *= -1.0;
    r += piece;
  }
  return r;
}

}  // namespace detail

inline InvariantForm exterior_derivative(const InvariantForm& a, const NilStructure& s) {
  detail::require_on_structure(a, s);
  InvariantForm r(a.degree() + 1, s.grid);
  if (a.degree() + 1 > s.rank()) return r;
  for (const auto& [idx, c] : a.terms()) {
    InvariantForm basis = InvariantForm::constant(s.grid, a.degree(), {{idx, 1.0}});
    if (const auto* grad = a.gradient(idx)) {
      for (int axis = 0; axis < static_cast<int>(grad->size()); ++axis)
        r += wedge((*grad)[axis] * s.base_differentials.at(axis), basis);
    } else {
      Spectrum spec(c);
      for (int axis = 0; axis < s.grid.dim(); ++axis)
        r += wedge(spec.derivative(axis, 1) * s.base_differentials.at(axis), basis);
    }
    if (!idx.empty()) r += c * detail::d_basis(idx, s);
  }
  return r;
}

inline InvariantForm apply_J(const InvariantForm& a, const NilStructure& s) {
  if (a.degree() != 1) throw FormError("apply_J expects a 1-form");
  detail::require_on_structure(a, s);
  InvariantForm r(1, s.grid);
  for (const auto& [idx, c] : a.terms()) {
    InvariantForm image = s.j_action.at(idx[0]);
    if (const auto* g = a.gradient(idx))
      image.multiply(c, *g);
    else
      image *= c;
    r += image;
  }
  return r;
}

/// a(J., J.) for a 2-form a.
inline InvariantForm apply_J_both(const InvariantForm& a, const NilStructure& s) {
  if (a.degree() != 2) throw FormError("expected a 2-form");
  detail::require_on_structure(a, s);
  InvariantForm r(2, s.grid);
  for (const auto& [idx, c] : a.terms())
    r += c * wedge(s.j_action.at(idx[0]), s.j_action.at(idx[1]));
  return r;
}

struct TypeSplit {
  InvariantForm invariant;       // (1,1) part
  InvariantForm anti_invariant;  // (2,0)+(0,2) part
};

inline TypeSplit type_split(const InvariantForm& a, const NilStructure& s) {
  if (a.degree() != 2) throw FormError("type_split expects a 2-form");
  InvariantForm ja = apply_J_both(a, s);
  return {0.5 * (a + ja), 0.5 * (a - ja)};
}

inline InvariantForm wedge_power(const InvariantForm& w, int k) {
  InvariantForm r = InvariantForm::constant(w.grid(), 0, {{{}, 1.0}});
  for (int i = 0; i < k; ++i) r = wedge(r, w);
  return r;
}

inline MultiIndex top_index(const NilStructure& s) {
  MultiIndex idx(s.rank());
  for (int i = 0; i < s.rank(); ++i) idx[i] = i;
  return idx;
}

/// r with top = r * Omega^n for a top-degree form.
inline ScalarField top_ratio_of(const InvariantForm& top, const NilStructure& s) {
  if (top.degree() != s.rank()) throw FormError("not a top-degree form");
  const double volume = wedge_power(s.omega, s.n).coefficient(top_index(s))[0];
  if (volume == 0.0) throw FormError("Omega^n is degenerate");
  return top.coefficient(top_index(s)) * (1.0 / volume);
}

/// r with w^n = r * Omega^n.
inline ScalarField top_form_ratio(const InvariantForm& w, const NilStructure& s) {
  if (w.degree() != 2) throw FormError("top_form_ratio expects a 2-form");
  detail::require_on_structure(w, s);
  return top_ratio_of(wedge_power(w, s.n), s);
}

/// Pointwise matrix of a 2-form: W(i,j) = w(E_i, E_j) on the dual frame.
inline std::vector<std::vector<ScalarField>> pairing_matrix(const InvariantForm& w,
                                                            const NilStructure& s) {
  const int m = s.rank();
  std::vector<std::vector<ScalarField>> W(m, std::vector<ScalarField>(m, ScalarField(s.grid)));
  for (const auto& [idx, c] : w.terms()) {
    W[idx[0]][idx[1]] += c;
    W[idx[1]][idx[0]] -= c;
  }
  return W;
}

/// Pointwise smallest eigenvalue of the symmetrized form w(., J.), times
/// the structure's compatibility sign.
inline ScalarField compatibility_margin(const InvariantForm& w, const NilStructure& s) {
  if (w.degree() != 2) throw FormError("compatibility_margin expects a 2-form");
  detail::require_on_structure(w, s);
  const int m = s.rank();
  auto W = pairing_matrix(w, s);
  // Jm(i,b): coefficient of theta^b in J(theta^i); J E_b = sum_i Jm(i,b) E_i.
  std::vector<std::vector<ScalarField>> Jm(m, std::vector<ScalarField>(m, ScalarField(s.grid)));
  for (int i = 0; i < m; ++i)
    for (const auto& [idx, c] : s.j_action[i].terms()) Jm[i][idx[0]] = c;
  ScalarField out(s.grid);
  parallel_for(s.grid.total(), [&](std::size_t p) {
    Eigen::MatrixXd Wp(m, m), Jp(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        Wp(i, j) = W[i][j][p];
        Jp(i, j) = Jm[i][j][p];
      }
    Eigen::MatrixXd G = Wp * Jp;
    Eigen::MatrixXd S = 0.5 * (G + G.transpose()) * static_cast<double>(s.compatibility_sign);
    out[p] = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly)
                 .eigenvalues()
                 .minCoeff();
  }, 256);
  return out;
}

/// Extra 1-forms added to -J du: sum_k (D_k u) * form_k, where D_k u is u
/// itself (derivative_axis < 0) or its partial along a base axis.
struct AnsatzCorrection {
  int derivative_axis = -1;
  InvariantForm form;
};

struct AnsatzSpec {
  std::vector<AnsatzCorrection> corrections;
};

namespace detail {

/// First and second partials of u, the latter as exact gradients of the
/// former.
struct PotentialJets {
  std::vector<ScalarField> du;
  std::vector<Gradient> ddu;
};

inline PotentialJets potential_jets(const ScalarField& u) {
  const int d = u.grid().dim();
  Spectrum su(u);
  PotentialJets j{std::vector<ScalarField>(d), std::vector<Gradient>(d, Gradient(d))};
  for (int a = 0; a < d; ++a) j.du[a] = su.derivative(a, 1);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      j.ddu[a][b] = a == b ? su.derivative(a, 2) : su.mixed(a, b);
      j.ddu[b][a] = j.ddu[a][b];
    }
  return j;
}

inline InvariantForm times(InvariantForm f, const ScalarField& c, const Gradient& g) {
  return f.multiply(c, g);
}

inline InvariantForm correction_from(const ScalarField& u, const PotentialJets& j, const AnsatzSpec& spec,
                                     const TorusGrid& g) {
  InvariantForm a(1, g);
  for (const auto& corr : spec.corrections) {
    if (corr.derivative_axis < 0)
      a += times(corr.form, u, j.du);
    else
      a += times(corr.form, j.du.at(corr.derivative_axis), j.ddu.at(corr.derivative_axis));
  }
  return a;
}

inline void require_potential(const ScalarField& u, const NilStructure& s) {
  if (!(u.grid() == s.grid))
    throw FormError("u is not in the invariance class of the structure (grid mismatch)");
}

}  // namespace detail

/// The correction a = alpha + J du alone.
inline InvariantForm ansatz_correction(const ScalarField& u, const NilStructure& s, const AnsatzSpec& spec) {
  detail::require_potential(u, s);
  return detail::correction_from(u, detail::potential_jets(u), spec, s.grid);
}

/// alpha = -J du + a.
inline InvariantForm ansatz_one_form(const ScalarField& u, const NilStructure& s,
                                     const AnsatzSpec& spec) {
  detail::require_potential(u, s);
  const auto jets = detail::potential_jets(u);
  InvariantForm differential(1, s.grid);
  for (int a = 0; a < s.grid.dim(); ++a)
    differential += detail::times(s.base_differentials.at(a), jets.du[a], jets.ddu[a]);
  return -1.0 * apply_J(differential, s) + detail::correction_from(u, jets, spec, s.grid);
}

// ---------------------------------------------------------------------------
// Structures.

namespace detail {

inline InvariantForm one_form(const TorusGrid& g, std::vector<std::pair<int, double>> terms) {
  InvariantForm r(1, g);
  for (auto [i, c] : terms) r.add_term({i}, ScalarField(g, c), Gradient{});
  return r;
}

inline InvariantForm zero2(const TorusGrid& g) { return InvariantForm(2, g); }

inline InvariantForm standard_omega(const TorusGrid& g, int n) {
  InvariantForm om(2, g);
  for (int k = 0; k < n; ++k) om.add_term({k, n + k}, ScalarField(g, 1.0), Gradient{});
  return om;
}

/// J(theta^k) = -s theta^{n+k}, J(theta^{n+k}) = s theta^k.
inline std::vector<InvariantForm> standard_j(const TorusGrid& g, int n, int s) {
  std::vector<InvariantForm> j;
  for (int k = 0; k < n; ++k) j.push_back(one_form(g, {{n + k, -1.0 * s}}));
  for (int k = 0; k < n; ++k) j.push_back(one_form(g, {{k, 1.0 * s}}));
  return j;
}

inline void check_axes(const TorusGrid& g, const std::vector<int>& axis_coframe, int rank) {
  if (static_cast<int>(axis_coframe.size()) != g.dim())
    throw FormError("one coframe slot per base axis is required");
  for (int c : axis_coframe)
    if (c < 0 || c >= rank) throw FormError("base axis mapped outside the coframe");
}

}  // namespace detail

// Coframe slots of the Kodaira-Thurston manifold.
inline constexpr int kE1 = 0, kE2 = 1, kF1 = 2, kF2 = 3;

/// Kodaira-Thurston coframe e1,e2,f1,f2 with df2 = -twist e1^e2 and
/// Omega0 = e1^f1 + e2^f2. With h given, J is J_h: J e1 = -e^h f1,
/// J e2 = -f2; otherwise J0. axis_coframe[a] names the coframe element
/// that is the differential of base axis a (kE1 for x1, kE2 for x2, kF1 for
/// y1).
inline NilStructure kodaira_thurston(const TorusGrid& g, std::vector<int> axis_coframe,
                                     const std::optional<ScalarField>& h = std::nullopt,
                                     double twist = 1.0) {
  detail::check_axes(g, axis_coframe, 4);
  NilStructure s;
  s.n = 2;
  s.grid = g;
  s.labels = {"e1", "e2", "f1", "f2"};
  s.d_table = {detail::zero2(g), detail::zero2(g), detail::zero2(g),
               InvariantForm::constant(g, 2, {{{kE1, kE2}, -twist}})};
  if (h) {
    if (!(h->grid() == g)) throw FormError("h must live on the base grid");
    InvariantForm je1(1, g), jf1(1, g);
    const ScalarField eh = exp(*h), emh = exp(-*h);
    InvariantForm::Gradient geh, gemh;
    for (int a = 0; a < g.dim(); ++a) {
      ScalarField ha = derivative(*h, a, 1);
      geh.push_back(eh * ha);
      gemh.push_back(-1.0 * (emh * ha));
    }
    je1.add_term({kF1}, eh, geh, -1.0);
    jf1.add_term({kE1}, emh, gemh);
    s.j_action = {je1, detail::one_form(g, {{kF2, -1.0}}), jf1, detail::one_form(g, {{kE2, 1.0}})};
  } else {
    s.j_action = detail::standard_j(g, 2, 1);
  }
  for (int c : axis_coframe) s.base_differentials.push_back(detail::one_form(g, {{c, 1.0}}));
  s.omega = detail::standard_omega(g, 2);
  return s;
}

/// Correction -twist * u e1 completing -J du on the Kodaira-Thurston coframe.
inline AnsatzSpec kodaira_thurston_ansatz(const TorusGrid& g, double twist = 1.0) {
  return {{{-1, detail::one_form(g, {{kE1, -twist}})}}};
}

/// Generalized nilmanifold M_n (n >= 3): de^k = 0, df^1 = 0,
/// df^k = e^k ^ e^1, J_n e^k = -f^k, Omega_n = sum e^k ^ f^k. Coframe slot
/// k-1 is e^k, slot n+k-1 is f^k.
inline NilStructure generalized_nilmanifold(const TorusGrid& g, int n, std::vector<int> axis_coframe) {
  if (n < 2) throw FormError("nilmanifold half-dimension must be >= 2");
  detail::check_axes(g, axis_coframe, 2 * n);
  NilStructure s;
  s.n = n;
  s.grid = g;
  for (int k = 1; k <= n; ++k) s.labels.push_back("e" + std::to_string(k));
  for (int k = 1; k <= n; ++k) s.labels.push_back("f" + std::to_string(k));
  for (int i = 0; i < n + 1; ++i) s.d_table.push_back(detail::zero2(g));
  for (int k = 2; k <= n; ++k)
    s.d_table.push_back(InvariantForm::constant(g, 2, {{{k - 1, 0}, 1.0}}));
  s.j_action = detail::standard_j(g, n, 1);
  for (int c : axis_coframe) s.base_differentials.push_back(detail::one_form(g, {{c, 1.0}}));
  s.omega = detail::standard_omega(g, n);
  return s;
}

inline AnsatzSpec generalized_nilmanifold_ansatz(const TorusGrid& g) {
  return {{{-1, detail::one_form(g, {{0, -1.0}})}}};
}

/// Hermitian coframe alpha1, alpha2, beta1, beta2 (slots 0..3) with
/// Omega = alpha1^beta1 + alpha2^beta2 and J alpha^k = -s beta^k. The
/// sign s = -1 gives the structure whose reduced equation has negative l.
struct LagrangianCoframe {
  double A = 1.0, B = 0.0, C = 1.0;
  // fibration over (x1, x2)
  double lambda1 = 0.0, lambda2 = 0.0;
  // fibration over (x2, y1): d beta2 = lambda a1^b1 + mu a2^b1 + kappa a1^a2
  double lambda = 0.0, mu = 0.0, kappa = 0.0;
  int sign = 1;
};

inline constexpr int kA1 = 0, kA2 = 1, kB1 = 2, kB2 = 3;

/// Base (x, y) = (x1, x2): dx = A alpha1, dy = B alpha1 + C alpha2,
/// d beta1 = lambda1 dx^dy, d beta2 = lambda2 dx^dy.
inline NilStructure lagrangian_x1x2(const TorusGrid& g, const LagrangianCoframe& p) {
  if (g.dim() != 2) throw FormError("Lagrangian coframe needs a 2-dimensional base");
  if (p.A == 0.0 || p.C == 0.0) throw FormError("coframe parameters A and C must be nonzero");
  NilStructure s;
  s.n = 2;
  s.grid = g;
  s.labels = {"a1", "a2", "b1", "b2"};
  const double ac = p.A * p.C;
  s.d_table = {detail::zero2(g), detail::zero2(g),
               InvariantForm::constant(g, 2, {{{kA1, kA2}, p.lambda1 * ac}}),
               InvariantForm::constant(g, 2, {{{kA1, kA2}, p.lambda2 * ac}})};
  s.j_action = detail::standard_j(g, 2, p.sign);
  s.base_differentials = {detail::one_form(g, {{kA1, p.A}}),
                          detail::one_form(g, {{kA1, p.B}, {kA2, p.C}})};
  s.omega = detail::standard_omega(g, 2);
  s.compatibility_sign = p.sign;
  return s;
}

/// Removes the exact (2,0)+(0,2) piece (lambda1 p + lambda2 q) dx^dy of
/// d(-J du): correction s*A*C*u*(lambda2 alpha1 - lambda1 alpha2).
inline AnsatzSpec lagrangian_x1x2_ansatz(const TorusGrid& g, const LagrangianCoframe& p) {
  const double k = p.sign * p.A * p.C;
  return {{{-1, detail::one_form(g, {{kA1, k * p.lambda2}, {kA2, -k * p.lambda1}})}}};
}

/// Base (x, y) = (x2, y1): dx = A alpha2, dy = B alpha2 + C beta1.
inline NilStructure lagrangian_x2y1(const TorusGrid& g, const LagrangianCoframe& p) {
  if (g.dim() != 2) throw FormError("Lagrangian coframe needs a 2-dimensional base");
  if (p.A == 0.0 || p.C == 0.0) throw FormError("coframe parameters A and C must be nonzero");
  NilStructure s;
  s.n = 2;
  s.grid = g;
  s.labels = {"a1", "a2", "b1", "b2"};
  s.d_table = {detail::zero2(g), detail::zero2(g), detail::zero2(g),
               InvariantForm::constant(
                   g, 2, {{{kA1, kB1}, p.lambda}, {{kA2, kB1}, p.mu}, {{kA1, kA2}, p.kappa}})};
  s.j_action = detail::standard_j(g, 2, p.sign);
  s.base_differentials = {detail::one_form(g, {{kA2, p.A}}),
                          detail::one_form(g, {{kA2, p.B}, {kB1, p.C}})};
  s.omega = detail::standard_omega(g, 2);
  s.compatibility_sign = p.sign;
  return s;
}

/// Correction s*kappa*u alpha1 - s*mu*u beta1.
inline AnsatzSpec lagrangian_x2y1_ansatz(const TorusGrid& g, const LagrangianCoframe& p) {
  return {{{-1, detail::one_form(g, {{kA1, p.sign * p.kappa}, {kB1, -p.sign * p.mu}})}}};
}

}  // namespace torus_ma
