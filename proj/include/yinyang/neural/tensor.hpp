#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace yinyang::neural {

// Sequences are stored one position per row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
struct Param {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool decay = true;  // weight decay applies (off for biases and norm gains)

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols, bool decays = true)
      : name(std::move(n)), value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)),
        decay(decays) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar>*>;

}  // namespace yinyang::neural
