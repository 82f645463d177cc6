#include "rnnbench/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace rnnbench {

namespace {

constexpr char kMagic[8] = {'R', 'N', 'N', 'B', 'E', 'N', 'C', 'H'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("checkpoint: unexpected end of file");
  return value;
}

void write_string(std::ostream& out, const std::string& s) {
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  auto len = read_raw<std::uint32_t>(in);
  if (len > (1u << 20)) throw ParseError("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ParseError("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const SequenceModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");

  out.write(kMagic, sizeof(kMagic));
  write_raw<std::uint32_t>(out, kVersion);

  std::map<std::string, std::int64_t> meta;
  meta["cell"] = static_cast<std::int64_t>(model.kind);
  meta["gru_variant"] = static_cast<std::int64_t>(model.gru_variant);
  meta["head"] = static_cast<std::int64_t>(head_kind_of(model.head));
  meta["n"] = model.n;
  meta["d_in"] = model.d_in;
  meta["d_out"] = model.d_out;
  meta["gmm_k"] = head_kind_of(model.head) == HeadKind::Gmm
                      ? std::get<GmmHead>(model.head).K
                      : 0;

  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [key, value] : meta) {
    write_string(out, key);
    write_raw<std::int64_t>(out, value);
  }

  auto views = tensor_views(model);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(views.size()));
  for (const auto& view : views) {
    write_string(out, view.name);
    write_raw<std::uint64_t>(out, view.data.size());
    out.write(reinterpret_cast<const char*>(view.data.data()),
              static_cast<std::streamsize>(view.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path);
}

SequenceModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path + " is not a checkpoint file");
  auto version = read_raw<std::uint32_t>(in);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, std::int64_t> meta;
  auto meta_count = read_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = read_string(in);
    meta[key] = read_raw<std::int64_t>(in);
  }
  for (const char* key : {"cell", "gru_variant", "head", "n", "d_in", "d_out", "gmm_k"})
    if (!meta.count(key)) throw ParseError("checkpoint missing meta key " + std::string(key));

  auto kind = static_cast<CellKind>(meta["cell"]);
  auto variant = static_cast<GruVariant>(meta["gru_variant"]);
  auto head = static_cast<HeadKind>(meta["head"]);
  int n = static_cast<int>(meta["n"]);
  int d_in = static_cast<int>(meta["d_in"]);
  int d_out = static_cast<int>(meta["d_out"]);
  int K = static_cast<int>(meta["gmm_k"]);

  SequenceModel model = make_zero_model(kind, head, n, d_in, d_out, variant,
                                        head == HeadKind::Gmm ? K : 20);

  std::map<std::string, TensorView> by_name;
  for (auto& view : tensor_views(model)) by_name.emplace(view.name, view);

  auto tensor_count = read_raw<std::uint32_t>(in);
  std::map<std::string, bool> filled;
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = read_string(in);
    auto count = read_raw<std::uint64_t>(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("checkpoint has unknown tensor " + name);
    if (count != it->second.data.size())
      throw ParseError("checkpoint tensor " + name + " has " + std::to_string(count) +
                       " elements, expected " + std::to_string(it->second.data.size()));
    in.read(reinterpret_cast<char*>(it->second.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ParseError("checkpoint: unexpected end of file in tensor " + name);
    filled[name] = true;
  }
  if (filled.size() != by_name.size())
    throw ParseError("checkpoint is missing tensors (" + std::to_string(filled.size()) +
                     " of " + std::to_string(by_name.size()) + ")");
  return model;
}

}  // namespace rnnbench
