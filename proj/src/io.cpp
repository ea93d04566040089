#include "ikd/io.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "ikd/embedding.hpp"
#include "ikd/errors.hpp"

namespace ikd {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void magic(const char tag[5]) { raw(tag, 4); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

  void write(const std::string& path) {
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), buf_.data(), static_cast<uInt>(buf_.size())));
    u32(crc);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed for " + path);
  }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::string& path, const char tag[5]) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf_.size() < 12) throw FormatError(path + ": truncated file");
    if (std::memcmp(buf_.data(), tag, 4) != 0) {
      throw FormatError(path + ": expected magic \"" + std::string(tag, 4) + "\"");
    }
    const std::size_t body = buf_.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t(buf_[body + i]) << (8 * i);
    const auto computed = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), buf_.data(), static_cast<uInt>(body)));
    if (stored != computed) throw FormatError(path + ": checksum mismatch");
    end_ = body;
    pos_ = 4;
    const std::uint32_t version = u32();
    if (version != kFormatVersion) {
      throw FormatError(path + ": unsupported version " + std::to_string(version));
    }
  }

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::VectorXd vec(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
  Eigen::MatrixXd mat(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
  }

  /// A dimension field that must fit comfortably in memory at desk scale.
  int dim(const char* what, std::uint32_t cap = 1u << 20) {
    const std::uint32_t v = u32();
    if (v > cap) throw FormatError(path_ + ": implausible " + what);
    return static_cast<int>(v);
  }

  void done() {
    if (pos_ != end_) throw FormatError(path_ + ": trailing bytes after payload");
  }

 private:
  void need(std::size_t n) {
    if (end_ - pos_ < n) throw FormatError(path_ + ": truncated file");
  }

  std::string path_;
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

void put_normalizer(ByteWriter& w, const Normalizer& nrm) {
  w.vec(nrm.mean);
  w.vec(nrm.std);
}

Normalizer get_normalizer(ByteReader& r, int dim) {
  Normalizer nrm;
  nrm.mean = r.vec(dim);
  nrm.std = r.vec(dim);
  return nrm;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  validate_dataset(ds);
  ByteWriter w;
  w.magic("IKDS");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(ds.state_dim));
  w.u32(static_cast<std::uint32_t>(ds.control_dim));
  w.u32(static_cast<std::uint32_t>(ds.seg_len));
  w.u64(ds.segments.size());
  put_normalizer(w, ds.normalizer);
  for (const Segment& seg : ds.segments) {
    w.u8(static_cast<std::uint8_t>(seg.provenance));
    w.u32(seg.iteration);
    w.mat(seg.states);
    w.mat(seg.controls);
  }
  w.write(path);
}

Dataset load_dataset(const std::string& path) {
  ByteReader r(path, "IKDS");
  Dataset ds;
  ds.state_dim = r.dim("state dimension");
  ds.control_dim = r.dim("control dimension");
  ds.seg_len = r.dim("segment length");
  const std::uint64_t count = r.u64();
  ds.normalizer = get_normalizer(r, ds.state_dim);
  ds.segments.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Segment seg;
    const std::uint8_t tag = r.u8();
    if (tag > 1) throw FormatError(path + ": unknown provenance tag");
    seg.provenance = static_cast<Provenance>(tag);
    seg.iteration = r.u32();
    seg.states = r.mat(ds.seg_len + 1, ds.state_dim);
    seg.controls = r.mat(ds.seg_len, ds.control_dim);
    ds.segments.push_back(std::move(seg));
  }
  r.done();
  return ds;
}

void save_model(const KoopmanModel& model, const std::string& path) {
  ByteWriter w;
  w.magic("IKPM");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.net.in_dim));
  w.u32(static_cast<std::uint32_t>(model.control_dim()));
  w.u32(static_cast<std::uint32_t>(model.net.lift_dim));
  w.u32(static_cast<std::uint32_t>(model.net.hidden));
  w.u32(static_cast<std::uint32_t>(model.net.blocks));
  put_normalizer(w, model.normalizer);
  w.vec(net_to_flat(model.net));
  w.mat(model.A);
  w.mat(model.B);
  w.write(path);
}

KoopmanModel load_model(const std::string& path) {
  ByteReader r(path, "IKPM");
  const int in_dim = r.dim("state dimension");
  const int control = r.dim("control dimension");
  const int lift = r.dim("lift dimension");
  const int hidden = r.dim("hidden width");
  const int blocks = r.dim("block count", 1u << 10);
  KoopmanModel model;
  model.normalizer = get_normalizer(r, in_dim);
  model.net = init_net(in_dim, lift, hidden, blocks, 0);
  net_from_flat(model.net, r.vec(model.net.param_count()));
  model.A = r.mat(lift, lift);
  model.B = r.mat(lift, control);
  r.done();
  return model;
}

void save_repo(const ReferenceRepository& repo, const std::string& path) {
  const Eigen::Index rows = repo.references.empty() ? 0 : repo.references.front().rows();
  for (const Eigen::MatrixXd& ref : repo.references) {
    if (ref.rows() != rows || ref.cols() != repo.state_dim) {
      throw ShapeMismatch("save_repo: ragged reference repository");
    }
  }
  ByteWriter w;
  w.magic("IKRR");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(repo.state_dim));
  w.u32(static_cast<std::uint32_t>(repo.references.size()));
  w.u32(static_cast<std::uint32_t>(rows));
  w.u64(repo.seed);
  w.f64(repo.noise_halfwidth);
  put_normalizer(w, repo.normalizer);
  for (const Eigen::MatrixXd& ref : repo.references) w.mat(ref);
  w.write(path);
}

ReferenceRepository load_repo(const std::string& path) {
  ByteReader r(path, "IKRR");
  ReferenceRepository repo;
  repo.state_dim = r.dim("state dimension");
  const int count = r.dim("reference count");
  const int rows = r.dim("reference length");
  repo.seed = r.u64();
  repo.noise_halfwidth = r.f64();
  repo.normalizer = get_normalizer(r, repo.state_dim);
  repo.references.reserve(count);
  for (int i = 0; i < count; ++i) {
    repo.references.push_back(r.mat(rows, repo.state_dim));
  }
  r.done();
  return repo;
}

}  // namespace ikd
