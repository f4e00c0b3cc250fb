#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rbscore {

// Per-coordinate bijection between a constrained parameter and an
// unconstrained working value.
enum class Transform { identity, log, artanh };

// A d-dimensional parameter point with labels and optional reparameterization.
class ThetaVector {
 public:
  ThetaVector() = default;
  ThetaVector(Eigen::VectorXd values, std::vector<std::string> names);
  ThetaVector(Eigen::VectorXd values, std::vector<std::string> names,
              std::vector<Transform> transforms);

  int size() const { return static_cast<int>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int i) const { return values_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Transform>& transforms() const { return transforms_; }

  Eigen::VectorXd unconstrained() const;
  static Eigen::VectorXd constrain(const Eigen::VectorXd& u, const std::vector<Transform>& tr);
  static Eigen::VectorXd unconstrain(const Eigen::VectorXd& theta,
                                     const std::vector<Transform>& tr);

  // Chain rule: gradient and observed information w.r.t. the unconstrained
  // coordinates, given their constrained-space counterparts at this point.
  Eigen::VectorXd unconstrained_gradient(const Eigen::VectorXd& grad) const;
  Eigen::MatrixXd unconstrained_information(const Eigen::VectorXd& grad,
                                            const Eigen::MatrixXd& info) const;

 private:
  Eigen::VectorXd values_;
  std::vector<std::string> names_;
  std::vector<Transform> transforms_;
};

}  // namespace rbscore
