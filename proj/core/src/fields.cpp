#include "mpflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpflow/detail/field_eval.hpp"
#include "mpflow/errors.hpp"

namespace mpflow {

double Schedule::value(double t) const {
  if (const auto* p = std::get_if<Polynomial>(&rule_)) {
    double acc = 0.0;
    for (auto it = p->coefficients.rbegin(); it != p->coefficients.rend(); ++it) acc = acc * t + *it;
    return acc;
  }
  const auto& s = std::get<Sine>(rule_);
  return s.offset + s.amplitude * std::sin(s.frequency * t + s.phase);
}

double Schedule::derivative(double t) const {
  if (const auto* p = std::get_if<Polynomial>(&rule_)) {
    double acc = 0.0;
    const auto& c = p->coefficients;
    for (std::size_t k = c.size(); k-- > 1;) acc = acc * t + static_cast<double>(k) * c[k];
    return acc;
  }
  const auto& s = std::get<Sine>(rule_);
  return s.amplitude * s.frequency * std::cos(s.frequency * t + s.phase);
}

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

struct DimensionOf {
  int operator()(const field::Constant& c) const {
    require(c.value.size() > 0 && all_finite(c.value), "constant field: empty or non-finite value");
    return static_cast<int>(c.value.size());
  }
  int operator()(const field::GaussianKernel& g) const {
    require(g.center.size() == g.amplitude.size() && g.center.size() > 0,
            "gaussian field: center/amplitude dimension mismatch");
    require(all_finite(g.center) && all_finite(g.amplitude), "gaussian field: non-finite parameter");
    require(std::isfinite(g.width) && g.width > 0.0, "gaussian field: width must be positive");
    return static_cast<int>(g.center.size());
  }
  int operator()(const field::ConformalAxis& c) const {
    require(c.dimension >= 1 && c.axis >= 0 && c.axis < c.dimension, "conformal field: bad axis");
    require(std::isfinite(c.beta), "conformal field: non-finite beta");
    return c.dimension;
  }
  int operator()(const field::KernelMomentum& k) const {
    require(!k.points.empty() && k.points.size() == k.momenta.size(),
            "kernel momentum field: need matching, non-empty points and momenta");
    require(std::isfinite(k.width) && k.width > 0.0, "kernel momentum field: width must be positive");
    const auto d = k.points.front().size();
    for (std::size_t i = 0; i < k.points.size(); ++i) {
      require(k.points[i].size() == d && k.momenta[i].size() == d,
              "kernel momentum field: inconsistent dimensions");
      require(all_finite(k.points[i]) && all_finite(k.momenta[i]), "kernel momentum field: non-finite entry");
    }
    return static_cast<int>(d);
  }
  int operator()(const field::Linear& l) const {
    require(l.A.rows() == l.A.cols() && l.A.rows() == l.offset.size() && l.A.rows() > 0,
            "linear field: A must be square and match the offset");
    require(l.A.allFinite() && all_finite(l.offset), "linear field: non-finite parameter");
    return static_cast<int>(l.offset.size());
  }
  int operator()(const field::Fourier& f) const {
    const auto d = f.direction.size();
    require(d > 0 && all_finite(f.direction), "fourier field: empty or non-finite direction");
    require(f.axis >= 0 && f.axis < d, "fourier field: axis out of range");
    require(std::isfinite(f.offset), "fourier field: non-finite offset");
    for (double c : f.sine) require(std::isfinite(c), "fourier field: non-finite coefficient");
    for (double c : f.cosine) require(std::isfinite(c), "fourier field: non-finite coefficient");
    return static_cast<int>(d);
  }
  int operator()(const field::Sum& s) const {
    require(!s.terms.empty(), "sum field: no terms");
    const int d = s.terms.front().dimension();
    for (const auto& t : s.terms) require(t.dimension() == d, "sum field: terms differ in dimension");
    return d;
  }
  int operator()(const field::TimeScaled& ts) const {
    require(ts.field != nullptr, "time-scaled field: missing inner field");
    return ts.field->dimension();
  }
  int operator()(const field::PeriodicSpline& sp) const {
    require(sp.spline != nullptr, "periodic spline field: missing spline");
    return 1;
  }
};

}  // namespace

VectorFieldSpec::VectorFieldSpec(Variant v) : v_(std::move(v)) {
  dim_ = std::visit(DimensionOf{}, v_);
  require(dim_ >= 1 && dim_ <= kMaxDimension, "field dimension must be 1, 2 or 3");
}

VectorFieldSpec VectorFieldSpec::zero(int dimension) {
  return constant(Eigen::VectorXd::Zero(dimension));
}
VectorFieldSpec VectorFieldSpec::constant(Eigen::VectorXd value) {
  return VectorFieldSpec(field::Constant{std::move(value)});
}
VectorFieldSpec VectorFieldSpec::gaussian(Eigen::VectorXd center, Eigen::VectorXd amplitude, double width) {
  return VectorFieldSpec(field::GaussianKernel{std::move(center), std::move(amplitude), width});
}
VectorFieldSpec VectorFieldSpec::conformal_axis(int dimension, int axis, double beta) {
  return VectorFieldSpec(field::ConformalAxis{dimension, axis, beta});
}
VectorFieldSpec VectorFieldSpec::kernel_momentum(std::vector<Eigen::VectorXd> points,
                                                 std::vector<Eigen::VectorXd> momenta, double width) {
  return VectorFieldSpec(field::KernelMomentum{std::move(points), std::move(momenta), width});
}
VectorFieldSpec VectorFieldSpec::linear(Eigen::MatrixXd A, Eigen::VectorXd offset) {
  return VectorFieldSpec(field::Linear{std::move(A), std::move(offset)});
}
VectorFieldSpec VectorFieldSpec::fourier(int axis, Eigen::VectorXd direction, double offset,
                                         std::vector<double> sine, std::vector<double> cosine) {
  return VectorFieldSpec(
      field::Fourier{axis, std::move(direction), offset, std::move(sine), std::move(cosine)});
}
VectorFieldSpec VectorFieldSpec::sum(std::vector<VectorFieldSpec> terms) {
  return VectorFieldSpec(field::Sum{std::move(terms)});
}
VectorFieldSpec VectorFieldSpec::time_scaled(VectorFieldSpec field, Schedule schedule) {
  return VectorFieldSpec(
      field::TimeScaled{std::make_shared<const VectorFieldSpec>(std::move(field)), std::move(schedule)});
}
VectorFieldSpec VectorFieldSpec::periodic_spline(std::shared_ptr<const SpaceTimeSpline> spline) {
  return VectorFieldSpec(field::PeriodicSpline{std::move(spline)});
}

NoiseModel::NoiseModel(std::vector<VectorFieldSpec> s, double floor)
    : sigmas(std::move(s)), ellipticity_floor(floor) {
  require(!sigmas.empty(), "noise model: at least one noise field is required");
  const int d = sigmas.front().dimension();
  for (const auto& f : sigmas) require(f.dimension() == d, "noise model: fields differ in dimension");
  require(std::isfinite(floor) && floor > 0.0, "noise model: ellipticity floor must be positive");
}

namespace {

void check_point(const VectorFieldSpec& field, const Eigen::VectorXd& x, double t) {
  require(x.size() == field.dimension(), "point dimension does not match field dimension");
  require(x.allFinite() && std::isfinite(t), "non-finite evaluation point");
}

template <class T, int D>
detail::Vec<Dual<Dual<T, D>, D>, D> seed_twice(const detail::Vec<T, D>& x) {
  detail::Vec<Dual<Dual<T, D>, D>, D> out;
  for (int i = 0; i < D; ++i) {
    out[i].v = make_variable<T, D>(x[i], i);
    out[i].d[i] = Dual<T, D>(1.0);
  }
  return out;
}

void symmetrize_hessians(std::vector<Eigen::MatrixXd>& h) {
  for (auto& m : h) {
    for (int i = 0; i < m.rows(); ++i)
      for (int k = i + 1; k < m.cols(); ++k) {
        const double avg = 0.5 * (m(i, k) + m(k, i));
        m(i, k) = avg;
        m(k, i) = avg;
      }
  }
}

void symmetrize_third(std::vector<Tensor3>& third) {
  for (auto& t : third) {
    const int d = t.dim();
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b)
        for (int c = b; c < d; ++c) {
          const double avg =
              (t(a, b, c) + t(a, c, b) + t(b, a, c) + t(b, c, a) + t(c, a, b) + t(c, b, a)) / 6.0;
          t(a, b, c) = t(a, c, b) = t(b, a, c) = t(b, c, a) = t(c, a, b) = t(c, b, a) = avg;
        }
  }
}

}  // namespace

Jet eval_jet(const VectorFieldSpec& field, double t, const Eigen::VectorXd& x, int order) {
  if (order < 0 || order > 3) throw InvalidArgument("eval_jet: order must be in 0..3");
  check_point(field, x, t);
  return detail::with_dimension(field.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto xa = detail::to_array<D>(x);
    Jet jet;
    jet.order = order;
    jet.value.resize(D);
    jet.time_derivative.resize(D);
    if (order == 0) {
      const auto j0 = detail::eval_jet0<double, D>(field, t, xa);
      for (int j = 0; j < D; ++j) {
        jet.value[j] = j0.value[j];
        jet.time_derivative[j] = j0.dt[j];
      }
      return jet;
    }
    jet.jacobian.resize(D, D);
    if (order == 1) {
      const auto j1 = detail::eval_jet1<double, D>(field, t, xa);
      for (int j = 0; j < D; ++j) {
        jet.value[j] = j1.value[j];
        jet.time_derivative[j] = j1.dt[j];
        for (int i = 0; i < D; ++i) jet.jacobian(i, j) = j1.jac[i][j];
      }
      return jet;
    }
    jet.hessians.assign(D, Eigen::MatrixXd::Zero(D, D));
    jet.time_jacobian.resize(D, D);
    if (order == 2) {
      const auto j2 = detail::eval_jet1<Dual<double, D>, D>(field, t, detail::seed<double, D>(xa));
      for (int j = 0; j < D; ++j) {
        jet.value[j] = j2.value[j].v;
        jet.time_derivative[j] = j2.dt[j].v;
        for (int i = 0; i < D; ++i) {
          jet.jacobian(i, j) = j2.jac[i][j].v;
          jet.time_jacobian(i, j) = j2.dt[j].d[i];
          for (int k = 0; k < D; ++k) jet.hessians[j](i, k) = j2.jac[i][j].d[k];
        }
      }
      symmetrize_hessians(jet.hessians);
      return jet;
    }
    const auto j3 = detail::eval_jet1<Dual<Dual<double, D>, D>, D>(field, t, seed_twice<double, D>(xa));
    jet.third.assign(D, Tensor3(D));
    for (int j = 0; j < D; ++j) {
      jet.value[j] = j3.value[j].v.v;
      jet.time_derivative[j] = j3.dt[j].v.v;
      for (int i = 0; i < D; ++i) {
        jet.jacobian(i, j) = j3.jac[i][j].v.v;
        jet.time_jacobian(i, j) = j3.dt[j].d[i].v;
        for (int k = 0; k < D; ++k) {
          jet.hessians[j](i, k) = j3.jac[i][j].d[k].v;
          for (int l = 0; l < D; ++l) jet.third[j](i, k, l) = j3.jac[i][j].d[k].d[l];
        }
      }
    }
    symmetrize_hessians(jet.hessians);
    symmetrize_third(jet.third);
    return jet;
  });
}

Eigen::VectorXd eval_value(const VectorFieldSpec& field, double t, const Eigen::VectorXd& x) {
  check_point(field, x, t);
  return detail::with_dimension(field.dimension(), [&](auto dc) {
    constexpr int D = decltype(dc)::value;
    const auto j0 = detail::eval_jet0<double, D>(field, t, detail::to_array<D>(x));
    Eigen::VectorXd v(D);
    for (int j = 0; j < D; ++j) v[j] = j0.value[j];
    return v;
  });
}

}  // namespace mpflow
