#include "mpicheck/locked_array.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>

namespace mpicheck {

std::string region_to_string(const Region& r) {
  if (const auto* a = std::get_if<Range1D>(&r)) {
    return "Range1D(" + std::to_string(a->start) + ", " + std::to_string(a->len) + ")";
  }
  if (const auto* b = std::get_if<RowBlock>(&r)) {
    return "RowBlock(" + std::to_string(b->first_row) + ", " + std::to_string(b->n_rows) + ")";
  }
  const auto& c = std::get<RowSegment>(r);
  return "RowSegment(" + std::to_string(c.row) + ", " + std::to_string(c.start_col) + ", " +
         std::to_string(c.len) + ")";
}

namespace detail {

LockedBuffer::LockedBuffer(std::size_t n, double fill)
    : data_(n, fill), read_count_(n, 0), write_locked_(n, false) {}

double LockedBuffer::get(std::size_t i) const {
  if (i >= data_.size()) {
    throw LockError(LockError::Kind::OutOfBounds, "get index " + std::to_string(i) +
                                                      " out of bounds (size " +
                                                      std::to_string(data_.size()) + ")");
  }
  if (write_locked_[i]) {
    throw LockError(LockError::Kind::ReadWhileWriteLocked,
                    "read of element " + std::to_string(i) + " while write-locked");
  }
  return data_[i];
}

void LockedBuffer::set(std::size_t i, double v) {
  if (i >= data_.size()) {
    throw LockError(LockError::Kind::OutOfBounds, "set index " + std::to_string(i) +
                                                      " out of bounds (size " +
                                                      std::to_string(data_.size()) + ")");
  }
  if (write_locked_[i] || read_count_[i] > 0) {
    throw LockError(LockError::Kind::WriteWhileLocked,
                    "write of element " + std::to_string(i) + " while locked");
  }
  data_[i] = v;
}

void LockedBuffer::acquire_read(const Region& r) {
  auto [start, len] = run_of(r);
  for (std::size_t i = start; i < start + len; ++i) {
    if (write_locked_[i]) {
      throw LockError(LockError::Kind::AcquireOnWriteLocked,
                      "read acquisition of " + region_to_string(r) +
                          " overlaps a write-locked element");
    }
  }
  for (std::size_t i = start; i < start + len; ++i) ++read_count_[i];
}

void LockedBuffer::release_read(const Region& r) {
  auto [start, len] = run_of(r);
  for (std::size_t i = start; i < start + len; ++i) {
    if (read_count_[i] == 0) {
      throw LockError(LockError::Kind::ReleaseUnheld,
                      "read release of " + region_to_string(r) + " not held");
    }
  }
  for (std::size_t i = start; i < start + len; ++i) --read_count_[i];
}

void LockedBuffer::acquire_write(const Region& r) {
  auto [start, len] = run_of(r);
  for (std::size_t i = start; i < start + len; ++i) {
    if (write_locked_[i] || read_count_[i] > 0) {
      throw LockError(LockError::Kind::AcquireConflict,
                      "write acquisition of " + region_to_string(r) +
                          " overlaps a locked element");
    }
  }
  for (std::size_t i = start; i < start + len; ++i) write_locked_[i] = true;
}

void LockedBuffer::release_write(const Region& r) {
  auto [start, len] = run_of(r);
  for (std::size_t i = start; i < start + len; ++i) {
    if (!write_locked_[i]) {
      throw LockError(LockError::Kind::ReleaseUnheld,
                      "write release of " + region_to_string(r) + " not held");
    }
  }
  for (std::size_t i = start; i < start + len; ++i) write_locked_[i] = false;
}

bool LockedBuffer::readable(const Region& r) const {
  auto [start, len] = run_of(r);
  for (std::size_t i = start; i < start + len; ++i) {
    if (write_locked_[i]) return false;
  }
  return true;
}

bool LockedBuffer::writable(const Region& r) const {
  auto [start, len] = run_of(r);
  for (std::size_t i = start; i < start + len; ++i) {
    if (write_locked_[i] || read_count_[i] > 0) return false;
  }
  return true;
}

std::vector<double> LockedBuffer::load_region(const Region& r) const {
  auto [start, len] = run_of(r);
  std::vector<double> out;
  out.reserve(len);
  for (std::size_t i = start; i < start + len; ++i) {
    if (write_locked_[i]) {
      throw LockError(LockError::Kind::ReadWhileWriteLocked,
                      "load of " + region_to_string(r) + " overlaps a write-locked element");
    }
    out.push_back(data_[i]);
  }
  return out;
}

void LockedBuffer::store_region(const Region& r, std::span<const double> values) {
  auto [start, len] = run_of(r);
  if (values.size() != len) {
    throw LockError(LockError::Kind::ShapeMismatch,
                    "store of " + std::to_string(values.size()) + " values into " +
                        region_to_string(r) + " of length " + std::to_string(len));
  }
  for (std::size_t i = 0; i < len; ++i) data_[start + i] = values[i];
}

void LockedBuffer::fill(double v) {
  for (std::size_t i = 0; i < data_.size(); ++i) set(i, v);
}

bool LockedBuffer::lock_invariant_holds() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (write_locked_[i] && read_count_[i] != 0) return false;
  }
  return true;
}

}  // namespace detail

LockedArray1D LockedArray1D::from(std::vector<double> values) {
  LockedArray1D a(values.size());
  a.data_ = std::move(values);
  return a;
}

std::pair<std::size_t, std::size_t> LockedArray1D::run_of(const Region& r) const {
  const auto* range = std::get_if<Range1D>(&r);
  if (!range) {
    throw LockError(LockError::Kind::OutOfBounds,
                    region_to_string(r) + " does not address a 1D array");
  }
  if (range->len == 0 || range->start + range->len > size()) {
    throw LockError(LockError::Kind::OutOfBounds,
                    region_to_string(r) + " out of bounds (size " + std::to_string(size()) + ")");
  }
  return {range->start, range->len};
}

LockedArray1D LockedArray1D::slice(const Region& r) const {
  return LockedArray1D::from(load_region(r));
}

void LockedArray1D::roll(std::int64_t shift) {
  const std::size_t n = size();
  if (n == 0) return;
  if (!writable(Range1D{0, n})) {
    throw LockError(LockError::Kind::WriteWhileLocked, "roll of a locked array");
  }
  std::int64_t k = shift % static_cast<std::int64_t>(n);
  if (k < 0) k += static_cast<std::int64_t>(n);
  std::rotate(data_.begin(), data_.end() - k, data_.end());
}

void LockedArray1D::axpy(double a, const LockedArray1D& x) {
  if (x.size() != size()) {
    throw LockError(LockError::Kind::ShapeMismatch, "axpy size mismatch");
  }
  for (std::size_t i = 0; i < size(); ++i) set(i, get(i) + a * x.get(i));
}

void LockedArray1D::add(const LockedArray1D& x) { axpy(1.0, x); }

void LockedArray1D::mul(const LockedArray1D& x) {
  if (x.size() != size()) {
    throw LockError(LockError::Kind::ShapeMismatch, "mul size mismatch");
  }
  for (std::size_t i = 0; i < size(); ++i) set(i, get(i) * x.get(i));
}

LockedArray2D::LockedArray2D(std::size_t rows, std::size_t cols, double fill)
    : LockedBuffer(rows * cols, fill), rows_(rows), cols_(cols) {}

std::size_t LockedArray2D::index(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) {
    throw LockError(LockError::Kind::OutOfBounds,
                    "(" + std::to_string(r) + ", " + std::to_string(c) + ") out of bounds (" +
                        std::to_string(rows_) + "x" + std::to_string(cols_) + ")");
  }
  return r * cols_ + c;
}

std::pair<std::size_t, std::size_t> LockedArray2D::run_of(const Region& r) const {
  if (const auto* b = std::get_if<RowBlock>(&r)) {
    if (b->n_rows == 0 || b->first_row + b->n_rows > rows_) {
      throw LockError(LockError::Kind::OutOfBounds,
                      region_to_string(r) + " out of bounds (" + std::to_string(rows_) +
                          " rows)");
    }
    return {b->first_row * cols_, b->n_rows * cols_};
  }
  if (const auto* s = std::get_if<RowSegment>(&r)) {
    if (s->row >= rows_ || s->len == 0 || s->start_col + s->len > cols_) {
      throw LockError(LockError::Kind::OutOfBounds,
                      region_to_string(r) + " out of bounds (" + std::to_string(rows_) + "x" +
                          std::to_string(cols_) + ")");
    }
    return {s->row * cols_ + s->start_col, s->len};
  }
  throw LockError(LockError::Kind::OutOfBounds,
                  region_to_string(r) + " does not address a 2D array");
}

LockedArray1D LockedArray2D::slice(const Region& r) const {
  return LockedArray1D::from(load_region(r));
}

bool LockedArray2D::check_contiguous(const Region& r) const {
  Region copy = r;
  return check_contiguous(std::span<const Region>(&copy, 1));
}

bool LockedArray2D::check_contiguous(std::span<const Region> regions) const {
  std::set<std::size_t> indices;
  for (const Region& r : regions) {
    auto [start, len] = run_of(r);
    for (std::size_t i = start; i < start + len; ++i) indices.insert(i);
  }
  if (indices.empty()) return false;
  std::size_t lo = *indices.begin();
  std::size_t hi = *indices.rbegin() + 1;
  if (hi - lo != indices.size()) return false;  // not even flat-consecutive
  if (cols_ == 1) return true;
  if (lo % cols_ == 0 && (hi - lo) % cols_ == 0) return true;  // whole rows
  return lo / cols_ == (hi - 1) / cols_;                       // within one row
}

void save_binary(const std::string& path, std::span<const std::size_t> dims,
                 std::span<const double> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  auto put_u64 = [&out](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(dims.size());
  for (std::size_t d : dims) put_u64(d);
  for (double v : data) put_u64(std::bit_cast<std::uint64_t>(v));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::pair<std::vector<std::size_t>, std::vector<double>> load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  auto get_u64 = [&in, &path]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("truncated binary array file '" + path + "'");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  std::size_t ndim = get_u64();
  std::vector<std::size_t> dims(ndim);
  std::size_t total = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = get_u64();
    total *= dims[i];
  }
  std::vector<double> data(total);
  for (std::size_t i = 0; i < total; ++i) data[i] = std::bit_cast<double>(get_u64());
  return {std::move(dims), std::move(data)};
}

void write_table(std::ostream& os, std::span<const double> data, std::size_t cols, char sep) {
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
    os << buf;
    os << (((i + 1) % cols == 0) ? '\n' : sep);
  }
}

}  // namespace mpicheck
