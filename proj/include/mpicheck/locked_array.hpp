#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mpicheck {

/// A rectangular piece of an array. Range1D addresses 1D arrays; RowBlock
/// and RowSegment address 2D arrays (row-major).
struct Range1D {
  std::size_t start = 0;
  std::size_t len = 0;
};
struct RowBlock {
  std::size_t first_row = 0;
  std::size_t n_rows = 0;
};
struct RowSegment {
  std::size_t row = 0;
  std::size_t start_col = 0;
  std::size_t len = 0;
};
using Region = std::variant<Range1D, RowBlock, RowSegment>;

std::string region_to_string(const Region& r);

class LockError : public std::runtime_error {
 public:
  enum class Kind {
    OutOfBounds,
    ReadWhileWriteLocked,
    WriteWhileLocked,
    AcquireOnWriteLocked,
    AcquireConflict,
    ReleaseUnheld,
    ShapeMismatch,
  };

  LockError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

/// Real-valued buffer with per-element read counters and write flags. A
/// region locked for writing can be neither read nor written; read locks
/// count concurrent readers and block writes only.
class LockedBuffer {
 public:
  std::size_t size() const { return data_.size(); }

  double get(std::size_t i) const;
  void set(std::size_t i, double v);

  void acquire_read(const Region& r);
  void release_read(const Region& r);
  void acquire_write(const Region& r);
  void release_write(const Region& r);

  bool readable(const Region& r) const;  // no element write-locked
  bool writable(const Region& r) const;  // no element locked at all

  /// Checked bulk read: fails on write-locked elements. Read locks held by
  /// pending sends do not block it.
  std::vector<double> load_region(const Region& r) const;

  /// Unchecked bulk write, for the operation that holds the region's write
  /// acquisition (a completing receive writes through its own lock).
  void store_region(const Region& r, std::span<const double> values);

  void fill(double v);

  std::size_t region_length(const Region& r) const { return run_of(r).second; }

  /// Holds after every operation: write_locked[i] implies read_count[i] = 0.
  bool lock_invariant_holds() const;

  const std::vector<double>& raw() const { return data_; }

 protected:
  explicit LockedBuffer(std::size_t n, double fill);
  virtual ~LockedBuffer() = default;

  // Flat run of indices addressed by a region, bounds-checked.
  virtual std::pair<std::size_t, std::size_t> run_of(const Region& r) const = 0;

  std::vector<double> data_;
  std::vector<std::uint32_t> read_count_;
  std::vector<bool> write_locked_;
};

}  // namespace detail

class LockedArray1D : public detail::LockedBuffer {
 public:
  explicit LockedArray1D(std::size_t n, double fill = 0.0) : LockedBuffer(n, fill) {}
  static LockedArray1D from(std::vector<double> values);

  /// Copy of a region as a fresh unlocked array.
  LockedArray1D slice(const Region& r) const;

  /// Cyclic shift by `shift` positions (positive shifts move elements to
  /// higher indices).
  void roll(std::int64_t shift);

  /// this[i] += a * x[i]
  void axpy(double a, const LockedArray1D& x);
  void add(const LockedArray1D& x);
  void mul(const LockedArray1D& x);

 protected:
  std::pair<std::size_t, std::size_t> run_of(const Region& r) const override;
};

class LockedArray2D : public detail::LockedBuffer {
 public:
  LockedArray2D(std::size_t rows, std::size_t cols, double fill = 0.0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double get(std::size_t r, std::size_t c) const { return LockedBuffer::get(index(r, c)); }
  void set(std::size_t r, std::size_t c, double v) { LockedBuffer::set(index(r, c), v); }

  std::size_t index(std::size_t r, std::size_t c) const;

  /// Row-major copy of a region as a 1D array.
  LockedArray1D slice(const Region& r) const;

  /// C-style contiguity: a whole consecutive block of rows, a segment
  /// within one row, or any flat-consecutive region when cols = 1.
  bool check_contiguous(const Region& r) const;
  bool check_contiguous(std::span<const Region> regions) const;

 protected:
  std::pair<std::size_t, std::size_t> run_of(const Region& r) const override;

 private:
  std::size_t rows_, cols_;
};

/// Flat binary format: u64 ndim, u64 dims[ndim], little-endian f64 data.
void save_binary(const std::string& path, std::span<const std::size_t> dims,
                 std::span<const double> data);
std::pair<std::vector<std::size_t>, std::vector<double>> load_binary(const std::string& path);

/// CSV (sep ",") or gnuplot matrix (sep " ") dump, one row per line.
void write_table(std::ostream& os, std::span<const double> data, std::size_t cols,
                 char sep = ',');

}  // namespace mpicheck
