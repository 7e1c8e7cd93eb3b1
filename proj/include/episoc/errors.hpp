#pragma once

#include <stdexcept>
#include <string>

namespace episoc
{

// Base of everything the library throws on purpose.
class error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class parse_error : public error
{
public:
  parse_error(std::string const &msg, std::size_t line)
      : error("line " + std::to_string(line) + ": " + msg), line_(line)
  {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class validation_error : public error
{
public:
  using error::error;
};

class parameter_error : public error
{
public:
  using error::error;
};

// Non-convergence, cycling guards, iteration caps.
class numerical_error : public error
{
public:
  using error::error;
};

// State corruption or a broken mathematical invariant.
class invariant_violation : public error
{
public:
  using error::error;
};

class illegal_transition : public error
{
public:
  using error::error;
};

class time_order_error : public error
{
public:
  using error::error;
};

class policy_error : public error
{
public:
  using error::error;
};

// An event log that cannot be replayed from its initial state.
class replay_error : public error
{
public:
  using error::error;
};

class config_error : public error
{
public:
  using error::error;
};

// Budget matching failed. Carries the closest scale that was tried.
class calibration_error : public error
{
public:
  explicit calibration_error(std::string const &msg, double best_scale = 0,
                             double best_achieved = 0)
      : error(msg), best_scale_(best_scale), best_achieved_(best_achieved)
  {}
  double best_scale() const noexcept { return best_scale_; }
  double best_achieved() const noexcept { return best_achieved_; }

private:
  double best_scale_;
  double best_achieved_;
};

} // namespace episoc
