#include "klab/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include "json.hpp"

namespace klab {

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// One c2c transform; FFTW plan creation is serialized, execution is not.
void run_fft(const TorusGrid& grid, std::vector<cd>& data, int sign) {
  const int rank = grid.real_dims();
  std::array<int, 4> dims{};
  for (int d = 0; d < rank; ++d) dims[d] = grid.N;
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    plan = fftw_plan_dft(rank, dims.data(), buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
}

}  // namespace

TorusGrid::TorusGrid(int n_, int N_) : n(n_), N(N_) {
  if (n < 1 || n > 2) throw Error("complex dimension must be 1 or 2");
  if (!power_of_two(N) || N < 8 || N > 256)
    throw Error("grid size must be a power of two in [8, 256]");
}

std::size_t TorusGrid::points() const {
  std::size_t p = 1;
  for (int d = 0; d < real_dims(); ++d) p *= static_cast<std::size_t>(N);
  return p;
}

double TorusGrid::cell_volume() const {
  double v = 1.0;
  for (int d = 0; d < real_dims(); ++d) v *= spacing();
  return v;
}

Field::Field(TorusGrid grid, Purity purity)
    : grid_(grid), purity_(purity), values_(grid.points(), cd{0.0, 0.0}) {}

Field::Field(TorusGrid grid, std::vector<cd> values, Purity purity)
    : grid_(grid), purity_(purity), values_(std::move(values)) {
  if (values_.size() != grid_.points()) throw Error("value count does not match grid");
}

double Field::coordinate(std::size_t i, int axis) const {
  const int rank = grid_.real_dims();
  std::size_t stride = 1;
  for (int d = rank - 1; d > axis; --d) stride *= grid_.N;
  const std::size_t idx = (i / stride) % grid_.N;
  return grid_.spacing() * static_cast<double>(idx);
}

double Field::max_abs() const {
  double m = 0.0;
  for (const cd& v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool Field::check_real(double tol) const {
  const double scale = max_abs();
  double im = 0.0;
  for (const cd& v : values_) im = std::max(im, std::abs(v.imag()));
  return im <= tol * std::max(scale, 1.0);
}

Field Field::real_part() const {
  Field out(grid_, Purity::Real);
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = values_[i].real();
  return out;
}

Field Field::imag_part() const {
  Field out(grid_, Purity::Real);
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = values_[i].imag();
  return out;
}

Field Field::conj() const {
  Field out(grid_, purity_);
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = std::conj(values_[i]);
  return out;
}

namespace {
void require_same(const Field& a, const Field& b) {
  if (!(a.grid() == b.grid())) throw GridMismatch();
}
Purity join(Purity a, Purity b) {
  return (a == Purity::Real && b == Purity::Real) ? Purity::Real : Purity::Complex;
}
}  // namespace

Field operator+(const Field& a, const Field& b) {
  require_same(a, b);
  Field out(a.grid(), join(a.purity(), b.purity()));
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Field operator-(const Field& a, const Field& b) {
  require_same(a, b);
  Field out(a.grid(), join(a.purity(), b.purity()));
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Field operator*(const Field& a, const Field& b) {
  require_same(a, b);
  Field out(a.grid(), join(a.purity(), b.purity()));
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Field operator*(cd s, const Field& a) {
  Field out(a.grid(), s.imag() == 0.0 ? a.purity() : Purity::Complex);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

Field operator*(double s, const Field& a) { return cd{s, 0.0} * a; }

Field& Field::operator+=(const Field& b) {
  require_same(*this, b);
  purity_ = join(purity_, b.purity());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += b[i];
  return *this;
}

Field& Field::operator-=(const Field& b) {
  require_same(*this, b);
  purity_ = join(purity_, b.purity());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= b[i];
  return *this;
}

Field sample(const TorusGrid& grid, const std::function<cd(const std::array<double, 4>&)>& f) {
  Field out(grid);
  std::array<double, 4> x{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int d = 0; d < grid.real_dims(); ++d) x[d] = out.coordinate(i, d);
    out[i] = f(x);
  }
  return out;
}

Field constant_field(const TorusGrid& grid, cd value) {
  Field out(grid, value.imag() == 0.0 ? Purity::Real : Purity::Complex);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value;
  return out;
}

std::vector<cd> fft(const Field& f) {
  std::vector<cd> coeffs = f.values();
  run_fft(f.grid(), coeffs, FFTW_FORWARD);
  const double scale = 1.0 / static_cast<double>(f.grid().points());
  for (cd& c : coeffs) c *= scale;
  return coeffs;
}

Field ifft(const TorusGrid& grid, const std::vector<cd>& coeffs, Purity purity) {
  if (coeffs.size() != grid.points()) throw Error("coefficient count does not match grid");
  std::vector<cd> values = coeffs;
  run_fft(grid, values, FFTW_BACKWARD);
  return Field(grid, std::move(values), purity);
}

int freq_of(const TorusGrid& grid, std::size_t i, int axis) {
  const int rank = grid.real_dims();
  std::size_t stride = 1;
  for (int d = rank - 1; d > axis; --d) stride *= grid.N;
  const int idx = static_cast<int>((i / stride) % grid.N);
  return idx <= grid.N / 2 ? idx : idx - grid.N;
}

Field spectral_derivative(const Field& f, int axis, DBar kind) {
  if (axis < 0 || axis >= f.grid().n) throw Error("axis out of range");
  std::vector<cd> coeffs = fft(f);
  const int xa = 2 * axis, ya = 2 * axis + 1;
  const int nyquist = f.grid().N / 2;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const int kx = freq_of(f.grid(), i, xa);
    const int ky = freq_of(f.grid(), i, ya);
    if (kx == nyquist || ky == nyquist) {
      coeffs[i] = 0.0;
      continue;
    }
    // d/dz = (d/dx - i d/dy)/2, d/dzbar = (d/dx + i d/dy)/2
    const cd mult = (kind == DBar::Holomorphic)
                        ? cd{0.5 * ky, 0.5 * kx}
                        : cd{-0.5 * ky, 0.5 * kx};
    coeffs[i] *= mult;
  }
  return ifft(f.grid(), coeffs, Purity::Complex);
}

Field real_derivative(const Field& f, int axis) {
  if (axis < 0 || axis >= f.grid().real_dims()) throw Error("axis out of range");
  std::vector<cd> coeffs = fft(f);
  const int nyquist = f.grid().N / 2;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const int k = freq_of(f.grid(), i, axis);
    coeffs[i] *= (k == nyquist) ? cd{0.0, 0.0} : cd{0.0, static_cast<double>(k)};
  }
  return ifft(f.grid(), coeffs, f.purity());
}

Field dealias(const Field& f) {
  std::vector<cd> coeffs = fft(f);
  const int cutoff = f.grid().N / 3;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    for (int d = 0; d < f.grid().real_dims(); ++d) {
      if (std::abs(freq_of(f.grid(), i, d)) > cutoff) {
        coeffs[i] = 0.0;
        break;
      }
    }
  }
  return ifft(f.grid(), coeffs, f.purity());
}

cd integrate(const Field& f, const Field& density) {
  require_same(f, density);
  cd acc{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * density[i];
  return acc * f.grid().cell_volume();
}

cd integrate(const Field& f) {
  cd acc{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i];
  return acc * f.grid().cell_volume();
}

cd inner_product(const Field& f, const Field& g, const Field& density) {
  require_same(f, g);
  require_same(f, density);
  cd acc{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * std::conj(g[i]) * density[i];
  return acc * f.grid().cell_volume();
}

double l2_norm(const Field& f, const Field& density) {
  return std::sqrt(std::abs(inner_product(f, f, density)));
}

std::string to_json(const Field& f) {
  nlohmann::json j;
  j["n"] = f.grid().n;
  j["N"] = f.grid().N;
  j["purity"] = f.purity() == Purity::Real ? "real" : "complex";
  nlohmann::json vals = nlohmann::json::array();
  for (const cd& v : f.values()) {
    vals.push_back(v.real());
    vals.push_back(v.imag());
  }
  j["values"] = std::move(vals);
  return j.dump();
}

Field field_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TorusGrid grid(j.at("n").get<int>(), j.at("N").get<int>());
  const Purity purity =
      j.at("purity").get<std::string>() == "real" ? Purity::Real : Purity::Complex;
  const auto& vals = j.at("values");
  if (vals.size() != 2 * grid.points()) throw Error("bad value count in field JSON");
  std::vector<cd> values(grid.points());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = cd{vals[2 * i].get<double>(), vals[2 * i + 1].get<double>()};
  return Field(grid, std::move(values), purity);
}

std::vector<std::uint8_t> to_binary(const Field& f) {
  // header: magic, n, N, purity as little-endian u32; then raw doubles.
  std::vector<std::uint8_t> out(16 + 16 * f.size());
  const std::uint32_t header[4] = {0x4b4c4146u, static_cast<std::uint32_t>(f.grid().n),
                                   static_cast<std::uint32_t>(f.grid().N),
                                   f.purity() == Purity::Real ? 0u : 1u};
  std::memcpy(out.data(), header, 16);
  std::memcpy(out.data() + 16, f.values().data(), 16 * f.size());
  return out;
}

Field field_from_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw Error("truncated field binary");
  std::uint32_t header[4];
  std::memcpy(header, bytes.data(), 16);
  if (header[0] != 0x4b4c4146u) throw Error("bad field binary magic");
  TorusGrid grid(static_cast<int>(header[1]), static_cast<int>(header[2]));
  if (bytes.size() != 16 + 16 * grid.points()) throw Error("bad field binary size");
  std::vector<cd> values(grid.points());
  std::memcpy(values.data(), bytes.data() + 16, 16 * values.size());
  return Field(grid, std::move(values), header[3] == 0 ? Purity::Real : Purity::Complex);
}

}  // namespace klab
