#pragma once

// Seeded random streams and samplers. Every unit of parallel work draws from
// its own stream derived from (seed, index), so results never depend on the
// number of threads.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "ahm/core.hpp"

namespace ahm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

/// Matrix with i.i.d. standard complex Gaussian entries (E|z|^2 = 1).
inline Matrix complex_gaussian(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = Complex(re, im);
    }
  return g;
}

/// Haar-distributed unitary: QR of a complex Gaussian with the phases of
/// R's diagonal absorbed into Q.
inline Matrix haar_unitary(Index n, Rng& rng) {
  const Matrix g = complex_gaussian(n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < n; ++k) {
    const double mod = std::abs(r(k, k));
    if (mod > 0.0) q.col(k) *= r(k, k) / mod;
  }
  return q;
}

inline Matrix haar_orthogonal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RealMatrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<RealMatrix> qr(g);
  RealMatrix q = qr.householderQ() * RealMatrix::Identity(n, n);
  const RealMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < n; ++k)
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  return q.cast<Complex>();
}

/// Random hermitian matrix G + G* with G standard complex Gaussian.
inline Matrix random_hermitian(Index n, Rng& rng) {
  const Matrix g = complex_gaussian(n, rng);
  return g + g.adjoint();
}

/// Random anti-hermitian matrix scaled to unit Frobenius norm.
inline Matrix random_skew(Index n, Rng& rng) {
  const Matrix g = complex_gaussian(n, rng);
  Matrix a = 0.5 * (g - g.adjoint());
  const double norm = a.norm();
  return norm > 0.0 ? Matrix(a / norm) : a;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items
/// must write to disjoint outputs; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += threads) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ahm
