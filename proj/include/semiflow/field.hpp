#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semiflow/expr.hpp"

namespace semiflow {

/// Autonomous vector field b : R^d -> R^d with one expression per component.
/// `lipschitz_claim` records the caller's assertion of local Lipschitz
/// regularity; it is bookkeeping, not something the library can verify.
class VectorField {
 public:
  VectorField(int dim, std::vector<Expr> components, bool lipschitz_claim = true)
      : dim_(dim), components_(std::move(components)), lipschitz_claim_(lipschitz_claim) {
    if (dim_ < 1) throw std::invalid_argument("VectorField: dimension must be >= 1");
    if (static_cast<int>(components_.size()) != dim_)
      throw std::invalid_argument("VectorField: need exactly one component per coordinate");
    for (const auto& c : components_)
      if (c.max_variable() > dim_)
        throw std::invalid_argument("VectorField: component references a variable beyond the dimension");
  }

  static VectorField parse(int dim, const std::vector<std::string>& sources, bool lipschitz_claim = true) {
    std::vector<Expr> comps;
    comps.reserve(sources.size());
    for (const auto& s : sources) comps.push_back(Expr::parse(s, dim));
    return VectorField(dim, std::move(comps), lipschitz_claim);
  }

  int dim() const { return dim_; }
  bool lipschitz_claim() const { return lipschitz_claim_; }
  const Expr& component(int i) const { return components_.at(static_cast<std::size_t>(i)); }

  void eval(std::span<const double> x, std::span<double> out) const {
    for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] = components_[static_cast<std::size_t>(i)].eval(x);
  }

  std::vector<double> operator()(std::span<const double> x) const {
    std::vector<double> out(static_cast<std::size_t>(dim_));
    eval(x, out);
    return out;
  }

  /// The field -b (same dimension, components negated).
  VectorField negated() const {
    std::vector<Expr> comps;
    comps.reserve(components_.size());
    for (const auto& c : components_) comps.push_back(c.negate());
    return VectorField(dim_, std::move(comps), lipschitz_claim_);
  }

 private:
  int dim_;
  std::vector<Expr> components_;
  bool lipschitz_claim_;
};

/// Scalar radial envelope beta(r), positive wherever it is evaluated.
/// The expression is one-dimensional; the variable may be written r, x or x1.
class RadialBound {
 public:
  RadialBound(Expr beta, double inner_radius) : beta_(std::move(beta)), inner_radius_(inner_radius) {
    if (!(inner_radius_ > 0.0)) throw std::invalid_argument("RadialBound: inner radius must be positive");
    if (beta_.max_variable() > 1) throw std::invalid_argument("RadialBound: expression must be one-dimensional");
  }

  static RadialBound parse(const std::string& src, double inner_radius) {
    return RadialBound(Expr::parse(src, 1), inner_radius);
  }

  double inner_radius() const { return inner_radius_; }
  const Expr& expr() const { return beta_; }

  /// beta(r); throws NonPositiveBound when the envelope fails positivity.
  double operator()(double r) const {
    double v = beta_.eval(std::span<const double>(&r, 1));
    if (!(v > 0.0)) throw NonPositiveBound(r, v);
    return v;
  }

 private:
  Expr beta_;
  double inner_radius_;
};

}  // namespace semiflow
