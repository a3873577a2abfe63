#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "klab/errors.hpp"

namespace klab {

using cd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Flat lattice (2*pi Z)^{2n} sampled with N points per real axis.
// Complex coordinate z^a = x^a + i y^a; axes are stored in the order
// (x^1, y^1[, x^2, y^2]) with x^1 slowest in memory.
struct TorusGrid {
  int n = 1;  // complex dimension, 1 or 2
  int N = 8;  // points per real axis, power of two in [8, 256]

  TorusGrid() = default;
  TorusGrid(int n_, int N_);

  int real_dims() const { return 2 * n; }
  std::size_t points() const;
  double spacing() const { return kTwoPi / N; }
  double cell_volume() const;

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;
};

enum class Purity { Real, Complex };
enum class DBar { Holomorphic, Antiholomorphic };

// Sampled smooth function on a TorusGrid.  Values are stored at the
// lattice points; the spectral view is obtained through fft()/ifft().
// Fields are immutable by convention: every operation returns a fresh one.
class Field {
 public:
  Field() = default;
  Field(TorusGrid grid, Purity purity = Purity::Complex);
  Field(TorusGrid grid, std::vector<cd> values, Purity purity = Purity::Complex);

  const TorusGrid& grid() const { return grid_; }
  Purity purity() const { return purity_; }
  const std::vector<cd>& values() const { return values_; }
  std::vector<cd>& values() { return values_; }
  std::size_t size() const { return values_.size(); }
  cd operator[](std::size_t i) const { return values_[i]; }
  cd& operator[](std::size_t i) { return values_[i]; }

  // Coordinates of lattice point i along real axis d (0..2n-1).
  double coordinate(std::size_t i, int axis) const;

  double max_abs() const;
  bool check_real(double tol = 1e-12) const;
  Field real_part() const;
  Field imag_part() const;
  Field conj() const;

  friend Field operator+(const Field& a, const Field& b);
  friend Field operator-(const Field& a, const Field& b);
  friend Field operator*(const Field& a, const Field& b);
  friend Field operator*(cd s, const Field& a);
  friend Field operator*(double s, const Field& a);
  Field& operator+=(const Field& b);
  Field& operator-=(const Field& b);

 private:
  TorusGrid grid_;
  Purity purity_ = Purity::Complex;
  std::vector<cd> values_;
};

// Point samples of a function of the real coordinates.
Field sample(const TorusGrid& grid, const std::function<cd(const std::array<double, 4>&)>& f);
Field constant_field(const TorusGrid& grid, cd value);

// Forward transform: coefficient c_k normalized so that
// f(x) = sum_k c_k exp(i k.x); inverse undoes it.
std::vector<cd> fft(const Field& f);
Field ifft(const TorusGrid& grid, const std::vector<cd>& coeffs, Purity purity = Purity::Complex);

// Integer frequency along real axis d for flattened spectral index i.
int freq_of(const TorusGrid& grid, std::size_t i, int axis);

// d/dz^axis (Holomorphic) or d/dzbar^axis (Antiholomorphic) by Fourier
// multiplier, with the convention d/dz = (d/dx - i d/dy)/2.
Field spectral_derivative(const Field& f, int axis, DBar kind);
// Plain d/dx^d along a real axis (d in 0..2n-1).
Field real_derivative(const Field& f, int axis);

// Low-pass to the lower 2/3 of modes (|k| <= N/3 on every axis).
Field dealias(const Field& f);

// Trapezoid-rule integral sum f * density * cell_volume.
cd integrate(const Field& f, const Field& density);
cd integrate(const Field& f);
// integrate(f * conj(g), density)
cd inner_product(const Field& f, const Field& g, const Field& density);
double l2_norm(const Field& f, const Field& density);

// Serialization: JSON {n, N, purity, values} and a flat binary format.
// Both round-trip bit exactly.
std::string to_json(const Field& f);
Field field_from_json(const std::string& text);
std::vector<std::uint8_t> to_binary(const Field& f);
Field field_from_binary(const std::vector<std::uint8_t>& bytes);

}  // namespace klab
