#include "cutpost/rng.hpp"

#include <cmath>
#include <numbers>

#include "cutpost/error.hpp"

namespace cutpost {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate_sample: return "degenerate_sample";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::unsupported_tag: return "unsupported_tag";
    case ErrorKind::shape: return "shape";
    case ErrorKind::initialization: return "initialization";
    case ErrorKind::singular: return "singular";
    case ErrorKind::conditioning: return "conditioning";
    case ErrorKind::duplicate_design: return "duplicate_design";
    case ErrorKind::mapping: return "mapping";
    case ErrorKind::bounds_violation: return "bounds_violation";
    case ErrorKind::config: return "config";
    case ErrorKind::data_integrity: return "data_integrity";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a
std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t id) {
  std::uint64_t a = mix64(seed ^ 0x5851f42d4c957f2dULL);
  std::uint64_t b = mix64(id + a);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : RngStream(seed, mix64(stream), 0) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t id, int)
    : seed_(seed), id_(id), engine_(make_engine(seed, id)) {}

RngStream RngStream::derive(std::uint64_t key) const {
  return RngStream(seed_, mix64(id_ * 0x9e3779b97f4a7c15ULL + mix64(key + 1)), 0);
}

RngStream RngStream::derive(std::string_view label) const {
  return derive(hash_label(label));
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  // Box-Muller without caching: each call consumes exactly two words.
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::argument, "below(0)");
  // Lemire-style rejection to avoid modulo bias.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RngStream::gamma(double shape) {
  // Marsaglia-Tsang; shape < 1 handled by the usual boost.
  if (shape <= 0.0) throw Error(ErrorKind::argument, "gamma shape must be positive");
  if (shape < 1.0) {
    const double u = uniform_open();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

}  // namespace cutpost
