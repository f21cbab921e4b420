#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gendid {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using IntMatrix = Mat<int>;

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind { Config, Infeasible, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define GENDID_DEFINE_ERROR(Name, Kind)                                                  \
  class Name : public Error {                                                            \
   public:                                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, #Name ": " + what) {} \
  };

// panel
GENDID_DEFINE_ERROR(BalancedPanelError, Data)
GENDID_DEFINE_ERROR(PeriodIndexError, Data)
GENDID_DEFINE_ERROR(TransformDomainError, Data)
GENDID_DEFINE_ERROR(AdoptionAtStartError, Data)
GENDID_DEFINE_ERROR(ParseError, Data)
// didmat
GENDID_DEFINE_ERROR(DesignTooSmallError, Data)
GENDID_DEFINE_ERROR(IndexError, Config)
// assumptions
GENDID_DEFINE_ERROR(NoTreatmentError, Data)
GENDID_DEFINE_ERROR(KeyError, Config)
GENDID_DEFINE_ERROR(EmptyEstimandError, Config)
GENDID_DEFINE_ERROR(EstimandSyntaxError, Config)
// covariance
GENDID_DEFINE_ERROR(CovarianceParamError, Config)
// solver / estimate
GENDID_DEFINE_ERROR(DegenerateVarianceError, Numerical)
GENDID_DEFINE_ERROR(NumericalError, Numerical)
GENDID_DEFINE_ERROR(DimensionError, Data)
GENDID_DEFINE_ERROR(DegenerateDesignError, Data)
// simulate / cli
GENDID_DEFINE_ERROR(UnsupportedEstimatorError, Config)
GENDID_DEFINE_ERROR(ConfigError, Config)

#undef GENDID_DEFINE_ERROR

}  // namespace gendid
