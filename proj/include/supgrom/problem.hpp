#pragma once
// The four benchmark optimal control problems. All share the PDE structure
//   -eps(mu) Lap y + b(x; mu) . grad y = u   (+ d/dt for the parabolic pair)
// with distributed L2 control, target tracking on an observation subdomain,
// Dirichlet data 0/1 on tagged boundary segments, and one Neumann segment on
// the Graetz outflow.
//
//   Graetz:  b = (4 x1 (1 - x1), 0),  eps = 1/mu1,          mu in [1e4,1e6]
//   Square:  b = (cos mu2, sin mu2),  eps = 1/mu1,          mu1 in [1e4,1e5], mu2 in [0,1.57]
//
// Affine parameter factors are identified by ThetaKind so that operator
// catalogs and reduced models can be serialized and rebuilt in another
// process without carrying closures around.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "supgrom/mesh.hpp"

namespace supgrom {

enum class ProblemId { GraetzSteady, GraetzParabolic, SquareSteady, SquareParabolic };
enum class StabMode { None, Supg };
enum class RomMode { OnlyOffline, OnlineOffline };

inline std::string problem_name(ProblemId id) {
  switch (id) {
    case ProblemId::GraetzSteady: return "graetz-steady";
    case ProblemId::GraetzParabolic: return "graetz-parabolic";
    case ProblemId::SquareSteady: return "square-steady";
    case ProblemId::SquareParabolic: return "square-parabolic";
  }
  throw std::invalid_argument("problem_name: unknown id");
}

inline ProblemId problem_from_name(const std::string& s) {
  for (ProblemId id : {ProblemId::GraetzSteady, ProblemId::GraetzParabolic,
                       ProblemId::SquareSteady, ProblemId::SquareParabolic})
    if (problem_name(id) == s) return id;
  throw std::invalid_argument("unknown problem \"" + s + "\"");
}

inline std::string rom_mode_name(RomMode m) {
  return m == RomMode::OnlineOffline ? "online-offline" : "only-offline";
}

inline RomMode rom_mode_from_name(const std::string& s) {
  if (s == "online-offline") return RomMode::OnlineOffline;
  if (s == "only-offline") return RomMode::OnlyOffline;
  throw std::invalid_argument("unknown stabilization mode \"" + s + "\"");
}

// SUPG element parameter delta_K. Constant uses the same delta everywhere (the
// benchmark setting). PecletSwitch follows the local-Peclet prescription
// delta1*h_K/eps in diffusion-dominated elements, delta2 in advection-dominated
// ones.
struct DeltaRule {
  enum class Kind { Constant, PecletSwitch };
  Kind kind = Kind::Constant;
  double delta = 1.0;
  double delta1 = 1.0;
  double delta2 = 1.0;
};

struct ParameterBox {
  std::vector<std::array<double, 2>> range;
  int dim() const { return static_cast<int>(range.size()); }

  bool contains(const std::vector<double>& mu) const {
    if (mu.size() != range.size()) return false;
    for (std::size_t i = 0; i < range.size(); ++i)
      if (mu[i] < range[i][0] || mu[i] > range[i][1]) return false;
    return true;
  }
};

struct ProblemDef {
  ProblemId id;
  Domain domain;
  ParameterBox parameter_box;
  double alpha = 0.01;
  DeltaRule delta_rule;
  bool time_dependent = false;
  double t_final = 0.0;
  int n_time_steps = 0;
  std::function<std::array<double, 2>(std::array<double, 2>, const std::vector<double>&)>
      advection_field;
  std::function<double(const std::vector<double>&)> diffusion;
  std::function<double(std::array<double, 2>, double)> y_desired;  // (x, t)
  std::vector<std::optional<double>> dirichlet_values;             // [tag-1]; nullopt = Neumann

  double dt() const {
    if (!time_dependent) throw std::logic_error("dt: steady problem");
    return t_final / n_time_steps;
  }
};

inline void check_mu(const ProblemDef& p, const std::vector<double>& mu) {
  if (static_cast<int>(mu.size()) != p.parameter_box.dim())
    throw std::invalid_argument("parameter vector has " + std::to_string(mu.size()) +
                                " entries, expected " + std::to_string(p.parameter_box.dim()));
}

inline ProblemDef make_problem(ProblemId id) {
  ProblemDef p;
  p.id = id;
  p.alpha = 0.01;
  p.delta_rule = DeltaRule{DeltaRule::Kind::Constant, 1.0, 1.0, 1.0};
  const bool graetz = id == ProblemId::GraetzSteady || id == ProblemId::GraetzParabolic;
  p.time_dependent = id == ProblemId::GraetzParabolic || id == ProblemId::SquareParabolic;
  if (p.time_dependent) {
    p.t_final = 3.0;
    p.n_time_steps = 30;
  }
  if (graetz) {
    p.domain = Domain::GraetzRect;
    p.parameter_box.range = {{1e4, 1e6}};
    p.advection_field = [](std::array<double, 2> x, const std::vector<double>&) {
      return std::array<double, 2>{4.0 * x[1] * (1.0 - x[1]), 0.0};
    };
    p.diffusion = [](const std::vector<double>& mu) { return 1.0 / mu[0]; };
    p.y_desired = [](std::array<double, 2>, double) { return 1.0; };
    // tags 1..6: bottom-left 0, bottom-right 1, outflow Neumann, top-right 1,
    // top-left 0, inflow 0
    p.dirichlet_values = {0.0, 1.0, std::nullopt, 1.0, 0.0, 0.0};
  } else {
    p.domain = Domain::UnitSquare;
    p.parameter_box.range = {{1e4, 1e5}, {0.0, 1.57}};
    p.advection_field = [](std::array<double, 2>, const std::vector<double>& mu) {
      return std::array<double, 2>{std::cos(mu[1]), std::sin(mu[1])};
    };
    p.diffusion = [](const std::vector<double>& mu) { return 1.0 / mu[0]; };
    p.y_desired = [](std::array<double, 2>, double) { return 0.5; };
    p.dirichlet_values = {1.0, 1.0, 0.0, 0.0, 0.0};
  }
  return p;
}

// Affine parameter factors.
enum class ThetaKind { One, InvMu1, CosMu2, SinMu2, CosCosMu2, SinCosMu2, SinSinMu2 };

inline double eval_theta(ThetaKind k, const std::vector<double>& mu) {
  switch (k) {
    case ThetaKind::One: return 1.0;
    case ThetaKind::InvMu1: return 1.0 / mu.at(0);
    case ThetaKind::CosMu2: return std::cos(mu.at(1));
    case ThetaKind::SinMu2: return std::sin(mu.at(1));
    case ThetaKind::CosCosMu2: {
      double c = std::cos(mu.at(1));
      return c * c;
    }
    case ThetaKind::SinCosMu2: return std::sin(mu.at(1)) * std::cos(mu.at(1));
    case ThetaKind::SinSinMu2: {
      double s = std::sin(mu.at(1));
      return s * s;
    }
  }
  throw std::invalid_argument("eval_theta: unknown kind");
}

inline std::string theta_name(ThetaKind k) {
  switch (k) {
    case ThetaKind::One: return "one";
    case ThetaKind::InvMu1: return "inv_mu1";
    case ThetaKind::CosMu2: return "cos_mu2";
    case ThetaKind::SinMu2: return "sin_mu2";
    case ThetaKind::CosCosMu2: return "cos2_mu2";
    case ThetaKind::SinCosMu2: return "sincos_mu2";
    case ThetaKind::SinSinMu2: return "sin2_mu2";
  }
  throw std::invalid_argument("theta_name: unknown kind");
}

inline ThetaKind theta_from_name(const std::string& s) {
  for (ThetaKind k : {ThetaKind::One, ThetaKind::InvMu1, ThetaKind::CosMu2, ThetaKind::SinMu2,
                      ThetaKind::CosCosMu2, ThetaKind::SinCosMu2, ThetaKind::SinSinMu2})
    if (theta_name(k) == s) return k;
  throw std::invalid_argument("unknown theta factor \"" + s + "\"");
}

}  // namespace supgrom
