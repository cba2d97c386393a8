#include "lrbms/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lrbms {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_csv: cannot open " + path);
  for (const std::string& c : table.comments)
    out << "# " << c << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const Vector& row : table.rows) {
    if (row.size() != table.columns.size())
      throw std::runtime_error("write_csv: row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  out.flush();
  if (!out)
    throw std::runtime_error("write_csv: failed writing " + path);
}

namespace {

constexpr char binary_magic[8] = {'L', 'R', 'B', 'S', 'R', 'E', 'C', '\0'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(std::ifstream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

struct BinaryRecordWriter::Impl {
  std::ofstream out;
  std::string path;
  bool closed = false;
};

BinaryRecordWriter::BinaryRecordWriter(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("BinaryRecordWriter: cannot open " + path);
  }
  impl_->out.write(binary_magic, sizeof(binary_magic));
  put_u64(impl_->out, format_version);
}

BinaryRecordWriter::~BinaryRecordWriter() {
  if (impl_ && !impl_->closed)
    impl_->out.flush();
  delete impl_;
}

void BinaryRecordWriter::write(const std::string& name, std::size_t rows, std::size_t cols,
                               std::span<const double> data) {
  if (data.size() != rows * cols)
    throw std::invalid_argument("BinaryRecordWriter: payload size mismatch for " + name);
  std::ofstream& out = impl_->out;
  put_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, rows);
  put_u64(out, cols);
  // Doubles are stored through their IEEE bit pattern, little endian.
  for (double v : data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
  }
}

void BinaryRecordWriter::write_scalar(const std::string& name, double value) {
  write(name, 1, 1, std::span<const double>(&value, 1));
}

void BinaryRecordWriter::write_vector(const std::string& name, const Vector& v) {
  write(name, v.size(), 1, v);
}

void BinaryRecordWriter::write_matrix(const std::string& name, const DenseMatrix& m) {
  write(name, m.rows(), m.cols(), m.data());
}

void BinaryRecordWriter::close() {
  impl_->out.flush();
  if (!impl_->out)
    throw std::runtime_error("BinaryRecordWriter: failed writing " + impl_->path);
  impl_->out.close();
  impl_->closed = true;
}

BinaryRecordFile::BinaryRecordFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("BinaryRecordFile: cannot open " + path);
  char magic[sizeof(binary_magic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, binary_magic, sizeof(magic)) != 0)
    throw std::runtime_error("BinaryRecordFile: " + path + " is not a record container");
  version_ = static_cast<unsigned>(get_u64(in));
  while (true) {
    const std::uint64_t name_len = get_u64(in);
    if (in.eof() || !in)
      break;
    if (name_len > 4096)
      throw std::runtime_error("BinaryRecordFile: corrupt record name in " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    Record rec;
    rec.rows = get_u64(in);
    rec.cols = get_u64(in);
    rec.data.resize(rec.rows * rec.cols);
    for (double& v : rec.data) {
      const std::uint64_t bits = get_u64(in);
      std::memcpy(&v, &bits, sizeof(v));
    }
    if (!in)
      throw std::runtime_error("BinaryRecordFile: truncated record " + name + " in " + path);
    records_.emplace(std::move(name), std::move(rec));
  }
}

bool BinaryRecordFile::has(const std::string& name) const { return records_.count(name) > 0; }

const BinaryRecordFile::Record& BinaryRecordFile::find(const std::string& name) const {
  const auto it = records_.find(name);
  if (it == records_.end())
    throw std::runtime_error("BinaryRecordFile: missing record " + name);
  return it->second;
}

std::size_t BinaryRecordFile::rows(const std::string& name) const { return find(name).rows; }
std::size_t BinaryRecordFile::cols(const std::string& name) const { return find(name).cols; }

double BinaryRecordFile::scalar(const std::string& name) const {
  const Record& r = find(name);
  if (r.data.size() != 1)
    throw std::runtime_error("BinaryRecordFile: record " + name + " is not a scalar");
  return r.data[0];
}

Vector BinaryRecordFile::vector(const std::string& name) const {
  const Record& r = find(name);
  if (r.cols != 1 && r.rows != 1)
    throw std::runtime_error("BinaryRecordFile: record " + name + " is not a vector");
  return r.data;
}

DenseMatrix BinaryRecordFile::matrix(const std::string& name) const {
  const Record& r = find(name);
  DenseMatrix m(r.rows, r.cols);
  m.data() = r.data;
  return m;
}

}  // namespace lrbms
