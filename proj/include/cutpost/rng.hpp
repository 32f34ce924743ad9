#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cutpost {

/// A seeded random stream identified by (seed, path). Child streams are
/// derived from the identifier alone, so the values a job sees never depend
/// on how much of the parent stream was consumed or on thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  /// Child stream keyed by an index (e.g. a chain or replicate number).
  RngStream derive(std::uint64_t key) const;
  /// Child stream keyed by a label (e.g. "phase1").
  RngStream derive(std::string_view label) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t id() const noexcept { return id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); never returns an endpoint.
  double uniform_open();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double gamma(double shape);
  double beta(double a, double b);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t id, int);

  std::uint64_t seed_;
  std::uint64_t id_;
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_label(std::string_view label) noexcept;

}  // namespace cutpost
