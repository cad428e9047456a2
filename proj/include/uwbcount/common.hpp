#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwbcount {

/// Raised when an argument violates an operation's precondition.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed containers, reports, or layout-version mismatches.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for config-file problems; carries the offending line when known.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line(line) {}
  int line;
};

/// Raised when a numeric routine produces non-finite output.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Selects the OpenMP kernel or the serial reference path. Both produce
/// identical results; the serial path is kept for testing and benchmarking.
enum class Execution { Serial, Parallel };

/// Runs fn(i) for i in [0, n). The parallel path distributes indices over
/// OpenMP threads; the first exception thrown by any task is rethrown here.
template <class Fn>
void for_each_index(std::size_t n, Execution exec, Fn&& fn) {
  const long count = static_cast<long>(n);
  if (exec == Execution::Serial) {
    for (long i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
    return;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(uwbcount_for_each_index)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Dense row-major real matrix. Rows are slow-time frames, columns are
/// fast-time bins when used as radar data.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Processing stage of a radar matrix.
enum class Stage : std::uint8_t { Raw = 0, Bandpass = 1, Refined = 2, Denoised = 3 };

const char* to_string(Stage s);

/// A slow-time x fast-time block of radar samples.
struct RadarMatrix {
  Matrix data;
  Stage stage = Stage::Raw;
  std::optional<int> label;

  std::size_t frames() const { return data.rows(); }
  std::size_t bins() const { return data.cols(); }
};

double sum_squares(std::span<const double> v);
double sum_squares(const Matrix& m);
bool all_finite(std::span<const double> v);

/// SplitMix64 finalizer. Child seeds are derived from a parent seed and a
/// counter so results never depend on worker identity or scheduling.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b);

/// Speed of light in vacuum, m/s.
inline constexpr double kSpeedOfLight = 299792458.0;

}  // namespace uwbcount
