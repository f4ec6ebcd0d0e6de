#include "training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "common/errors.hpp"

namespace lesion {
namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) {
  put_u64(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

void put_array(std::vector<std::uint8_t>& out, const std::string& name, const Tensor& t, int bits) {
  put_bytes(out, name);
  put_u64(out, t.numel());
  for (Scalar v : t.data()) {
    if (bits == 32) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    } else {
      const auto u = std::bit_cast<std::uint64_t>(static_cast<double>(v));
      put_u64(out, u);
    }
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw ParseError(std::string("checkpoint truncated reading ") + what + " at byte offset " +
                       std::to_string(pos_));
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string string(const char* what) {
    const auto n = u64(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Scalar element(int bits) {
    if (bits == 32) {
      need(4, "array elements");
      std::uint32_t u = 0;
      for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
      pos_ += 4;
      return static_cast<Scalar>(std::bit_cast<float>(u));
    }
    return static_cast<Scalar>(std::bit_cast<double>(u64("array elements")));
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> parse_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("checkpoint header line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::uint64_t header_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("checkpoint header is missing '" + key + "'");
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ParseError("checkpoint header '" + key + "' is not an integer");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt, int element_bits) {
  if (element_bits != 32 && element_bits != 64) throw ConfigError("element_bits must be 32 or 64");
  std::string header = "format_version=" + std::to_string(ckpt.format_version) + "\n";
  header += "element_bits=" + std::to_string(element_bits) + "\n";
  header += "global_step=" + std::to_string(ckpt.global_step) + "\n";
  header += "has_optimizer=" + std::string(ckpt.optimizer ? "1" : "0") + "\n";
  header += "adam_step=" + std::to_string(ckpt.optimizer ? ckpt.optimizer->step : 0) + "\n";
  header += ckpt.config.to_text();

  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_bytes(out, header);
  for (const auto& p : ckpt.params) put_array(out, p.name, p.value, element_bits);
  if (ckpt.optimizer) {
    for (std::size_t i = 0; i < ckpt.params.size(); ++i)
      put_array(out, "adam.m." + ckpt.params[i].name, ckpt.optimizer->first_moment.at(i), element_bits);
    for (std::size_t i = 0; i < ckpt.params.size(); ++i)
      put_array(out, "adam.v." + ckpt.params[i].name, ckpt.optimizer->second_moment.at(i), element_bits);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader reader(bytes);
  const auto magic = reader.take(8, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 8) != 0)
    throw ParseError("checkpoint magic mismatch: expected \"LSNFRMT1\"");
  const auto header = parse_header(reader.string("header"));

  Checkpoint ckpt;
  const auto version = header_u64(header, "format_version");
  if (version != kCheckpointVersion) throw ParseError("unknown checkpoint format_version " + std::to_string(version));
  ckpt.format_version = static_cast<std::uint32_t>(version);
  const auto bits = static_cast<int>(header_u64(header, "element_bits"));
  if (bits != 32 && bits != 64) throw ParseError("unsupported checkpoint element_bits " + std::to_string(bits));
  ckpt.global_step = header_u64(header, "global_step");
  const bool has_optimizer = header_u64(header, "has_optimizer") != 0;

  std::string config_text;
  for (const auto& key : RunConfig::keys()) {
    const auto it = header.find(key);
    if (it != header.end()) config_text += key + "=" + it->second + "\n";
  }
  try {
    ckpt.config = RunConfig::from_text(config_text);
    ckpt.config.model.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint config invalid: ") + e.what());
  }

  auto read_into = [&](const std::string& expected_name, Tensor& target) {
    const std::string name = reader.string("array name");
    if (name != expected_name)
      throw ParseError("checkpoint array '" + name + "' found where '" + expected_name + "' was expected");
    const auto count = reader.u64("array length");
    if (count != target.numel())
      throw ParseError("checkpoint array '" + name + "' has " + std::to_string(count) + " elements, expected " +
                       std::to_string(target.numel()));
    for (auto& v : target.data()) v = reader.element(bits);
  };

  ckpt.params = ModelParams::zeros_like(ckpt.config.model);
  for (auto& p : ckpt.params) read_into(p.name, p.value);
  if (has_optimizer) {
    AdamState state = AdamState::zeros_like(ckpt.params);
    state.step = header_u64(header, "adam_step");
    for (std::size_t i = 0; i < ckpt.params.size(); ++i)
      read_into("adam.m." + ckpt.params[i].name, state.first_moment[i]);
    for (std::size_t i = 0; i < ckpt.params.size(); ++i)
      read_into("adam.v." + ckpt.params[i].name, state.second_moment[i]);
    ckpt.optimizer = std::move(state);
  }
  if (!reader.done()) throw ParseError("checkpoint has trailing bytes after the last array");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace lesion
