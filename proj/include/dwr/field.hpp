#pragma once

#include <functional>
#include <memory>

#include "dwr/fe_space.hpp"
#include "dwr/geometry.hpp"

namespace dwr {

/// A scalar coefficient on the unit square: a constant, an analytic function,
/// or a scaled finite element function. FE-backed fields evaluate cell-locally
/// when integrated on their own mesh, and by point location otherwise.
class ScalarField {
 public:
  ScalarField() : ScalarField(constant(0.0)) {}

  static ScalarField constant(double c) {
    ScalarField f(Kind::Constant);
    f.scale_ = c;
    return f;
  }

  static ScalarField function(std::function<double(Point)> fn) {
    ScalarField f(Kind::Function);
    f.fn_ = std::move(fn);
    return f;
  }

  static ScalarField fe(FeFunction u, double scale = 1.0) {
    ScalarField f(Kind::Fe);
    f.fe_ = std::make_shared<const FeFunction>(std::move(u));
    f.scale_ = scale;
    return f;
  }

  ScalarField scaled(double s) const {
    ScalarField f = *this;
    if (kind_ == Kind::Function) {
      auto inner = fn_;
      f.fn_ = [inner, s](Point x) { return s * inner(x); };
    } else {
      f.scale_ *= s;
    }
    return f;
  }

  bool is_constant() const { return kind_ == Kind::Constant; }
  bool is_zero() const { return kind_ == Kind::Constant && scale_ == 0.0; }

  double operator()(Point x) const {
    switch (kind_) {
      case Kind::Constant: return scale_;
      case Kind::Function: return fn_(x);
      case Kind::Fe: {
        const Mesh& m = fe_->space().mesh();
        const std::size_t cell = m.locate(x);
        return scale_ * fe_->eval_on_cell(cell, to_reference(m, cell, x)).value;
      }
    }
    return 0.0;
  }

  /// Value at reference point `ref` (physical `x`) of active cell `cell` of `mesh`.
  double on_cell(const Mesh& mesh, std::size_t cell, Point ref, Point x) const {
    if (kind_ == Kind::Fe && &fe_->space().mesh() == &mesh) {
      return scale_ * fe_->eval_on_cell(cell, ref).value;
    }
    return (*this)(x);
  }

 private:
  enum class Kind { Constant, Function, Fe };
  explicit ScalarField(Kind k) : kind_(k) {}

  Kind kind_;
  double scale_ = 1.0;
  std::function<double(Point)> fn_;
  std::shared_ptr<const FeFunction> fe_;
};

}  // namespace dwr
