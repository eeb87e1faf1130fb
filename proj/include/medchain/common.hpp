#ifndef MEDCHAIN_COMMON_HPP
#define MEDCHAIN_COMMON_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace medchain {

/// Input that violates a documented contract (bad file, bad field, bad config).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation that could not produce a finite result (overflow, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for a sub-task identified by a list of integers. Independent of
/// scheduling order, so results do not depend on the worker count.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(base, path));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Every index
/// is executed exactly once; exceptions are rethrown (lowest index first).
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

/// Hardware concurrency with a floor of 1.
int default_threads();

}  // namespace medchain

#endif
