#include "etk/etk1.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "etk/errors.hpp"

namespace etk::io {

namespace {

constexpr char kMagic[4] = {'E', 'T', 'K', '1'};
constexpr std::uint16_t kVersion = 1;

enum Kind : std::uint16_t {
  kTrajectory = 1,
  kTensor = 2,
  kBundle = 3,
  kProfile = 4,
};

constexpr std::uint32_t fourcc(char a, char b, char c, char d) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(a)) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b)) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d)) << 24;
}

constexpr std::uint32_t kHead = fourcc('H', 'E', 'A', 'D');
constexpr std::uint32_t kCond = fourcc('C', 'O', 'N', 'D');
constexpr std::uint32_t kData = fourcc('D', 'A', 'T', 'A');
constexpr std::uint32_t kXStart = fourcc('X', 'S', 'T', 'R');
constexpr std::uint32_t kZSeq = fourcc('Z', 'S', 'E', 'Q');
constexpr std::uint32_t kRes1 = fourcc('R', 'E', 'S', '1');
constexpr std::uint32_t kVecs = fourcc('V', 'E', 'C', 'S');
constexpr std::uint32_t kLambda = fourcc('L', 'M', 'B', 'D');
constexpr std::uint32_t kMask = fourcc('M', 'A', 'S', 'K');

class Packer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t b = 0;
    std::memcpy(&b, &v, sizeof b);
    u64(b);
  }
  void vec(VecRef v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  std::string take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i)
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class Unpacker {
 public:
  Unpacker(std::string data, std::string what)
      : data_(std::move(data)), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() {
    const std::uint64_t b = u64();
    double v = 0.0;
    std::memcpy(&v, &b, sizeof v);
    return v;
  }
  Vec vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = f64();
    return v;
  }
  bool done() const { return pos_ == data_.size(); }
  std::string take(std::size_t n) {
    if (data_.size() - pos_ < n) throw InputError(what_ + ": truncated file");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_done() const {
    if (!done()) throw InputError(what_ + ": trailing bytes in section");
  }

 private:
  std::uint64_t le(int bytes) {
    if (data_.size() - pos_ < static_cast<std::size_t>(bytes))
      throw InputError(what_ + ": truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

void pack_condition(Packer& p, const Condition& c) {
  p.u8(c.is_conditional() ? 1 : 0);
  p.u32(c.is_conditional() ? static_cast<std::uint32_t>(c.weights.size()) : 0);
  if (c.is_conditional()) p.vec(c.weights);
}

Condition unpack_condition(Unpacker& u, const std::string& what) {
  const std::uint8_t kind = u.u8();
  const std::uint32_t k = u.u32();
  if (kind == 0) {
    if (k != 0)
      throw InputError(what + ": unconditional block carries weights");
    return Condition::unconditional();
  }
  if (kind != 1) throw InputError(what + ": unknown condition kind");
  return Condition::component_weights(u.vec(static_cast<Eigen::Index>(k)));
}

using Sections = std::vector<std::pair<std::uint32_t, std::string>>;

void write_file(const std::string& path, std::uint16_t kind,
                const Sections& sections) {
  Packer p;
  for (char c : kMagic) p.u8(static_cast<std::uint8_t>(c));
  p.u16(kVersion);
  p.u16(kind);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("etk1: cannot open " + path + " for writing");
  const std::string header = p.take();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [tag, payload] : sections) {
    Packer sp;
    sp.u32(tag);
    sp.u64(payload.size());
    const std::string s = sp.take();
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw InputError("etk1: write failed for " + path);
}

std::map<std::uint32_t, std::string> read_file(const std::string& path,
                                               std::uint16_t want_kind,
                                               const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(what + ": cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  Unpacker u(std::move(data), what);
  for (char c : kMagic)
    if (u.u8() != static_cast<std::uint8_t>(c))
      throw InputError(what + ": bad magic in " + path);
  if (u.u16() != kVersion)
    throw InputError(what + ": unsupported version in " + path);
  if (u.u16() != want_kind)
    throw InputError(what + ": wrong artifact kind in " + path);
  std::map<std::uint32_t, std::string> sections;
  while (!u.done()) {
    const std::uint32_t tag = u.u32();
    const std::uint64_t len = u.u64();
    if (!sections.emplace(tag, u.take(static_cast<std::size_t>(len))).second)
      throw InputError(what + ": duplicate section in " + path);
  }
  return sections;
}

Unpacker section(const std::map<std::uint32_t, std::string>& sections,
                 std::uint32_t tag, const std::string& what) {
  const auto it = sections.find(tag);
  if (it == sections.end()) throw InputError(what + ": missing section");
  return Unpacker(it->second, what);
}

}  // namespace

void write_tensor(const std::string& path, VecRef x) {
  Packer head;
  head.u32(static_cast<std::uint32_t>(x.size()));
  Packer data;
  data.vec(x);
  write_file(path, kTensor, {{kHead, head.take()}, {kData, data.take()}});
}

Vec read_tensor(const std::string& path) {
  const auto sections = read_file(path, kTensor, "tensor");
  auto head = section(sections, kHead, "tensor");
  const auto n = static_cast<Eigen::Index>(head.u32());
  head.expect_done();
  auto data = section(sections, kData, "tensor");
  Vec x = data.vec(n);
  data.expect_done();
  return x;
}

void write_trajectory(const std::string& path, const NoiseTrajectory& traj) {
  Packer head;
  head.u32(static_cast<std::uint32_t>(traj.T_start));
  head.u32(static_cast<std::uint32_t>(traj.dim()));
  head.u64(traj.seed);
  head.u64(traj.schedule_hash);
  head.f64(traj.guidance_src);
  Packer cond;
  pack_condition(cond, traj.cond_src);
  Packer xstart;
  xstart.vec(traj.x_start);
  Packer zseq;
  for (const auto& z : traj.z) zseq.vec(z);
  Packer res;
  res.vec(traj.residual);
  write_file(path, kTrajectory,
             {{kHead, head.take()},
              {kCond, cond.take()},
              {kXStart, xstart.take()},
              {kZSeq, zseq.take()},
              {kRes1, res.take()}});
}

NoiseTrajectory read_trajectory(const std::string& path) {
  const auto sections = read_file(path, kTrajectory, "trajectory");
  auto head = section(sections, kHead, "trajectory");
  NoiseTrajectory traj;
  traj.T_start = static_cast<int>(head.u32());
  const auto dim = static_cast<Eigen::Index>(head.u32());
  traj.seed = head.u64();
  traj.schedule_hash = head.u64();
  traj.guidance_src = head.f64();
  head.expect_done();
  if (traj.T_start < 1) throw InputError("trajectory: T_start < 1");
  auto cond = section(sections, kCond, "trajectory");
  traj.cond_src = unpack_condition(cond, "trajectory");
  cond.expect_done();
  auto xstart = section(sections, kXStart, "trajectory");
  traj.x_start = xstart.vec(dim);
  xstart.expect_done();
  auto zseq = section(sections, kZSeq, "trajectory");
  traj.z.resize(static_cast<std::size_t>(traj.T_start - 1));
  for (auto& z : traj.z) z = zseq.vec(dim);
  zseq.expect_done();
  auto res = section(sections, kRes1, "trajectory");
  traj.residual = res.vec(dim);
  res.expect_done();
  return traj;
}

void write_bundle(const std::string& path, const PcBundle& bundle) {
  Packer head;
  head.u32(static_cast<std::uint32_t>(bundle.t_lo));
  head.u32(static_cast<std::uint32_t>(bundle.t_hi));
  head.u32(static_cast<std::uint32_t>(bundle.n_pcs));
  head.u32(static_cast<std::uint32_t>(bundle.dim()));
  head.u32(static_cast<std::uint32_t>(bundle.params.iters));
  head.f64(bundle.params.probe_c);
  head.f64(bundle.params.rho);
  head.f64(bundle.guidance);
  head.u64(bundle.schedule_hash);
  head.u64(bundle.seed);
  Packer cond;
  pack_condition(cond, bundle.cond);
  Packer vecs;
  for (const auto& v : bundle.basis)
    for (Eigen::Index c = 0; c < v.cols(); ++c) vecs.vec(v.col(c));
  Packer lmbd;
  for (const auto& l : bundle.lambda) lmbd.vec(l);
  Sections sections{{kHead, head.take()},
                    {kCond, cond.take()},
                    {kVecs, vecs.take()},
                    {kLambda, lmbd.take()}};
  if (bundle.mask) {
    Packer mask;
    mask.vec(*bundle.mask);
    sections.emplace_back(kMask, mask.take());
  }
  write_file(path, kBundle, sections);
}

PcBundle read_bundle(const std::string& path) {
  const auto sections = read_file(path, kBundle, "pc bundle");
  auto head = section(sections, kHead, "pc bundle");
  PcBundle b;
  b.t_lo = static_cast<int>(head.u32());
  b.t_hi = static_cast<int>(head.u32());
  b.n_pcs = static_cast<int>(head.u32());
  const auto dim = static_cast<Eigen::Index>(head.u32());
  b.params.n_pcs = b.n_pcs;
  b.params.iters = static_cast<int>(head.u32());
  b.params.probe_c = head.f64();
  b.params.rho = head.f64();
  b.guidance = head.f64();
  b.schedule_hash = head.u64();
  b.seed = head.u64();
  head.expect_done();
  if (b.t_lo < 1 || b.t_hi < b.t_lo || b.n_pcs < 1)
    throw InputError("pc bundle: bad header ranges");
  auto cond = section(sections, kCond, "pc bundle");
  b.cond = unpack_condition(cond, "pc bundle");
  cond.expect_done();
  const int len = b.t_hi - b.t_lo + 1;
  auto vecs = section(sections, kVecs, "pc bundle");
  b.basis.resize(static_cast<std::size_t>(len));
  for (auto& v : b.basis) {
    v = Mat(dim, b.n_pcs);
    for (int c = 0; c < b.n_pcs; ++c) v.col(c) = vecs.vec(dim);
  }
  vecs.expect_done();
  auto lmbd = section(sections, kLambda, "pc bundle");
  b.lambda.resize(static_cast<std::size_t>(len));
  for (auto& l : b.lambda) l = lmbd.vec(b.n_pcs);
  lmbd.expect_done();
  if (sections.count(kMask)) {
    auto mask = section(sections, kMask, "pc bundle");
    b.mask = mask.vec(dim);
    mask.expect_done();
  }
  return b;
}

void write_profile(const std::string& path, const LambdaProfile& profile) {
  Packer head;
  head.u32(static_cast<std::uint32_t>(profile.t_lo));
  head.u32(static_cast<std::uint32_t>(profile.t_hi));
  head.u32(static_cast<std::uint32_t>(profile.n_pcs()));
  Packer data;
  for (Eigen::Index c = 0; c < profile.lambda.cols(); ++c)
    data.vec(profile.lambda.col(c));
  write_file(path, kProfile, {{kHead, head.take()}, {kData, data.take()}});
}

LambdaProfile read_profile(const std::string& path) {
  const auto sections = read_file(path, kProfile, "lambda profile");
  auto head = section(sections, kHead, "lambda profile");
  LambdaProfile p;
  p.t_lo = static_cast<int>(head.u32());
  p.t_hi = static_cast<int>(head.u32());
  const auto n_pcs = static_cast<Eigen::Index>(head.u32());
  head.expect_done();
  if (p.t_lo < 1 || p.t_hi < p.t_lo || n_pcs < 1)
    throw InputError("lambda profile: bad header ranges");
  const Eigen::Index len = p.t_hi - p.t_lo + 1;
  auto data = section(sections, kData, "lambda profile");
  p.lambda = Mat(n_pcs, len);
  for (Eigen::Index c = 0; c < len; ++c) p.lambda.col(c) = data.vec(n_pcs);
  data.expect_done();
  return p;
}

}  // namespace etk::io
