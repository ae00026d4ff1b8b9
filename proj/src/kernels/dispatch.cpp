#include <atomic>
#include <cstdlib>
#include <string>

#include "hyperproto/errors.hpp"
#include "hyperproto/kernels.hpp"

namespace hyperproto::kernels {

namespace {

struct Table {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_norm)(const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*adam_update)(double*, const double*, double*, double*, std::size_t, const AdamCoefficients&);
};

constexpr Table kScalar{Backend::Scalar,   scalar::dot,   scalar::squared_norm, scalar::squared_distance,
                        scalar::axpy,      scalar::scale, scalar::adam_update};
#if HYPERPROTO_HAVE_AVX2_KERNELS
constexpr Table kAvx2{Backend::Avx2,   avx2::dot,   avx2::squared_norm, avx2::squared_distance,
                      avx2::axpy,      avx2::scale, avx2::adam_update};
#endif

bool cpu_has_avx2() {
#if HYPERPROTO_HAVE_AVX2_KERNELS && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* table_for(Backend b) {
#if HYPERPROTO_HAVE_AVX2_KERNELS
  if (b == Backend::Avx2) return &kAvx2;
#endif
  (void)b;
  return &kScalar;
}

const Table* initial_table() {
  if (const char* env = std::getenv("HYPERPROTO_KERNELS")) {
    const std::string name(env);
    if (name == "scalar") return &kScalar;
    if (name == "avx2" && cpu_has_avx2()) return table_for(Backend::Avx2);
  }
  return cpu_has_avx2() ? table_for(Backend::Avx2) : &kScalar;
}

std::atomic<const Table*>& active() {
  static std::atomic<const Table*> table{initial_table()};
  return table;
}

inline const Table& t() { return *active().load(std::memory_order_relaxed); }

void check_same(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError("kernel operands differ in length: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::string_view backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

bool backend_available(Backend b) { return b == Backend::Scalar || cpu_has_avx2(); }

Backend active_backend() { return t().backend; }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw DomainError("kernel backend '" + std::string(backend_name(b)) + "' is not supported on this CPU");
  }
  active().store(table_for(b), std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size());
  return t().dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> a) { return t().squared_norm(a.data(), a.size()); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size());
  return t().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same(x.size(), y.size());
  t().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { t().scale(alpha, x.data(), x.size()); }

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c) {
  check_same(param.size(), grad.size());
  check_same(param.size(), m.size());
  check_same(param.size(), v.size());
  t().adam_update(param.data(), grad.data(), m.data(), v.data(), param.size(), c);
}

}  // namespace hyperproto::kernels
