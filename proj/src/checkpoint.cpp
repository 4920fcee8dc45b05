#include "motiondiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

namespace {

constexpr char kMagic[6] = {'M', 'D', 'I', 'F', 'F', '1'};
constexpr std::uint64_t kMaxName = 1 << 16;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    bytes(&v, sizeof(v));
    return v;
  }
  std::string str(std::uint64_t limit) {
    const std::uint64_t n = u64();
    if (n > limit) fail("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  [[noreturn]] void fail(const std::string& what) const { throw DataError(source_ + ": " + what); }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace

ModelParams select_params(const ModelParams& params, const std::string& prefix, bool keep_matching) {
  ModelParams out;
  for (std::size_t i = 0; i < params.count(); ++i) {
    const bool match = params.name(i).rfind(prefix, 0) == 0;
    if (match == keep_matching) out.add(params.name(i), params.tensor(i));
  }
  return out;
}

ModelParams merge_params(const ModelParams& a, const ModelParams& b) {
  ModelParams out;
  for (std::size_t i = 0; i < a.count(); ++i) out.add(a.name(i), a.tensor(i));
  for (std::size_t i = 0; i < b.count(); ++i) out.add(b.name(i), b.tensor(i));
  return out;
}

ModelParams Checkpoint::diffusion_params() const { return select_params(params, "ref.", false); }
ModelParams Checkpoint::refiner_params() const { return select_params(params, "ref.", true); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["kind"] = ckpt.kind;
  meta["epoch"] = ckpt.epoch;
  meta["loss"] = ckpt.loss;
  meta["config"] = config_to_json(ckpt.config);
  const std::string meta_text = meta.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put_u64(out, meta_text.size());
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    put_u64(out, ckpt.params.count());
    for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
      const std::string& name = ckpt.params.name(i);
      const Tensor& t = ckpt.params.tensor(i);
      put_u64(out, name.size());
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u64(out, t.rows());
      put_u64(out, t.cols());
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    out.flush();
    if (!out) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a checkpoint (bad magic)");

  Checkpoint ckpt;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.str(1 << 24));
    ckpt.kind = meta.at("kind").get<std::string>();
    ckpt.epoch = meta.at("epoch").get<int>();
    ckpt.loss = meta.at("loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad metadata: ") + e.what());
  }
  if (ckpt.kind != "diffusion" && ckpt.kind != "refiner") r.fail("unknown checkpoint kind '" + ckpt.kind + "'");
  try {
    ckpt.config = config_from_json(meta.at("config"));
  } catch (const ConfigError& e) {
    r.fail(std::string("bad stored config: ") + e.what());
  }

  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str(kMaxName);
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows == 0 || cols == 0 || rows > (1ULL << 32) / cols) r.fail("implausible shape for " + name);
    Tensor t(rows, cols);
    r.bytes(t.data(), t.size() * sizeof(double));
    if (ckpt.params.contains(name)) r.fail("duplicate tensor " + name);
    ckpt.params.add(name, std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after last tensor");
  return ckpt;
}

}  // namespace motiondiff
