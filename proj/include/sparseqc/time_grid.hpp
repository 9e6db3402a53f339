#pragma once

#include <Eigen/Dense>

#include "sparseqc/errors.hpp"

namespace sparseqc {

/// Uniform grid on [0, t_final] with n_steps intervals.
class TimeGrid {
 public:
  TimeGrid(double t_final, Eigen::Index n_steps) : t_final_(t_final), n_steps_(n_steps) {
    if (!(t_final > 0.0)) throw ConfigError("TimeGrid: t_final must be positive");
    if (n_steps < 1) throw ConfigError("TimeGrid: n_steps must be at least 1");
  }

  double t_final() const { return t_final_; }
  Eigen::Index n_steps() const { return n_steps_; }
  Eigen::Index n_nodes() const { return n_steps_ + 1; }
  double step() const { return t_final_ / static_cast<double>(n_steps_); }

  double node(Eigen::Index j) const {
    return j == n_steps_ ? t_final_ : step() * static_cast<double>(j);
  }
  double midpoint(Eigen::Index j) const { return step() * (static_cast<double>(j) + 0.5); }

  Eigen::VectorXd nodes() const {
    Eigen::VectorXd t(n_nodes());
    for (Eigen::Index j = 0; j < n_nodes(); ++j) t[j] = node(j);
    return t;
  }
  Eigen::VectorXd midpoints() const {
    Eigen::VectorXd t(n_steps_);
    for (Eigen::Index j = 0; j < n_steps_; ++j) t[j] = midpoint(j);
    return t;
  }

  bool operator==(const TimeGrid&) const = default;

 private:
  double t_final_;
  Eigen::Index n_steps_;
};

}  // namespace sparseqc
