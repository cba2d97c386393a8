#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lrbms/linalg.hpp"

namespace lrbms {

/// Locale-independent formatting with 17 significant digits, enough to round
/// trip any double.
std::string format_double(double v);

/// Comma-separated table. Comment lines are prefixed with '#' so consumers can
/// strip run metadata (timestamps, timings) and still compare data rows.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<Vector> rows;
};

void write_csv(const CsvTable& table, const std::string& path);

/// Sequential binary container of named double arrays: a fixed magic and
/// format version, then length-prefixed records (name, rows, cols, payload).
/// Output bytes are a pure function of the written records.
class BinaryRecordWriter {
 public:
  static constexpr unsigned format_version = 1;

  explicit BinaryRecordWriter(const std::string& path);
  ~BinaryRecordWriter();

  BinaryRecordWriter(const BinaryRecordWriter&) = delete;
  BinaryRecordWriter& operator=(const BinaryRecordWriter&) = delete;

  void write(const std::string& name, std::size_t rows, std::size_t cols,
             std::span<const double> data);
  void write_scalar(const std::string& name, double value);
  void write_vector(const std::string& name, const Vector& v);
  void write_matrix(const std::string& name, const DenseMatrix& m);

  /// Flushes and closes; throws on IO failure. Called by the destructor if
  /// needed, but an explicit call surfaces errors.
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

/// Reads a record container written by BinaryRecordWriter into memory.
class BinaryRecordFile {
 public:
  explicit BinaryRecordFile(const std::string& path);

  unsigned version() const { return version_; }

  bool has(const std::string& name) const;
  std::size_t rows(const std::string& name) const;
  std::size_t cols(const std::string& name) const;

  double scalar(const std::string& name) const;
  Vector vector(const std::string& name) const;
  DenseMatrix matrix(const std::string& name) const;

 private:
  struct Record {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
  };
  const Record& find(const std::string& name) const;

  unsigned version_ = 0;
  std::map<std::string, Record> records_;
};

}  // namespace lrbms
