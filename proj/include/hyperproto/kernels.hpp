#pragma once

// Dense double-precision inner loops shared by every module. Each kernel has
// a portable scalar reference in `kernels::scalar` and, on x86-64, an
// AVX2+FMA variant in `kernels::avx2`. The unqualified functions dispatch to
// the backend selected at startup (best available, or the one named by the
// HYPERPROTO_KERNELS environment variable: "scalar" or "avx2").
//
// Reductions accumulate in a fixed lane order, so a given backend is
// deterministic; backends agree to rounding, not bitwise.

#include <cstddef>
#include <span>
#include <string_view>

namespace hyperproto::kernels {

enum class Backend { Scalar, Avx2 };

struct AdamCoefficients {
  double beta1;
  double beta2;
  double step_size;      // lr / (1 - beta1^t)
  double inv_sqrt_bias2; // 1 / sqrt(1 - beta2^t)
  double eps;
};

std::string_view backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();
/// Throws DomainError when `b` is not supported by this CPU.
void set_backend(Backend b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
/// One Adam step over flat parameter/gradient/moment buffers.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define HYPERPROTO_HAVE_AVX2_KERNELS 1
namespace avx2 {
// Callable only when backend_available(Backend::Avx2).
double dot(const double* a, const double* b, std::size_t n);
double squared_norm(const double* a, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c);
}  // namespace avx2
#else
#define HYPERPROTO_HAVE_AVX2_KERNELS 0
#endif

}  // namespace hyperproto::kernels
