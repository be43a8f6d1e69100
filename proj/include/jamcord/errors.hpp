#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace jamcord {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: non-finite numbers, unknown JSON fields, bad schema.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class JointLimitError : public Error {
 public:
  JointLimitError(std::size_t joint, double angle_deg, double lo_deg, double hi_deg)
      : Error("joint " + std::to_string(joint) + " angle " + std::to_string(angle_deg) +
              " deg outside [" + std::to_string(lo_deg) + ", " + std::to_string(hi_deg) + "]"),
        joint_(joint) {}
  std::size_t joint() const noexcept { return joint_; }

 private:
  std::size_t joint_;
};

/// A configuration invariant does not hold. Carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double worst_residual)
      : Error(what + " (worst residual " + std::to_string(worst_residual) + " N*mm)"),
        worst_residual_(worst_residual) {}
  double worst_residual() const noexcept { return worst_residual_; }

 private:
  double worst_residual_;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

}  // namespace jamcord
