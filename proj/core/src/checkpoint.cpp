#include "ilr/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ilr/error.hpp"

namespace ilr {

namespace {

constexpr std::string_view kMagic = "ILRCKPT1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

struct Cursor {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) {
      fail(ErrorKind::Format, std::string("checkpoint truncated at offset ") +
                                  std::to_string(pos) + " while reading " + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

std::size_t get_size(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    fail(ErrorKind::Format, "checkpoint config lacks '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument(key);
    }
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "checkpoint config '" + key + "' is not an integer: " + it->second);
  }
}

}  // namespace

KeyValues model_config_entries(const ModelConfig& config) {
  KeyValues kv;
  kv["model.vocab_size"] = std::to_string(config.backbone.vocab_size);
  kv["model.d_model"] = std::to_string(config.backbone.d_model);
  kv["model.n_layers"] = std::to_string(config.backbone.n_layers);
  kv["model.n_heads"] = std::to_string(config.backbone.n_heads);
  kv["model.ffn_dim"] = std::to_string(config.backbone.ffn_dim);
  kv["model.max_context"] = std::to_string(config.backbone.max_context);
  kv["model.trainable"] = config.backbone.trainable ? "1" : "0";
  kv["model.visual_dim"] = std::to_string(config.visual_dim);
  kv["model.adaptor_hidden"] = std::to_string(config.adaptor_hidden);
  kv["model.shared_dim"] = std::to_string(config.shared_dim);
  kv["model.dim_img"] = std::to_string(config.item_dims[0]);
  kv["model.dim_cf"] = std::to_string(config.item_dims[1]);
  kv["model.dim_text"] = std::to_string(config.item_dims[2]);
  return kv;
}

ModelConfig model_config_from(const KeyValues& kv) {
  ModelConfig c;
  c.backbone.vocab_size = get_size(kv, "model.vocab_size");
  c.backbone.d_model = get_size(kv, "model.d_model");
  c.backbone.n_layers = get_size(kv, "model.n_layers");
  c.backbone.n_heads = get_size(kv, "model.n_heads");
  c.backbone.ffn_dim = get_size(kv, "model.ffn_dim");
  c.backbone.max_context = get_size(kv, "model.max_context");
  c.backbone.trainable = get_size(kv, "model.trainable") != 0;
  c.visual_dim = get_size(kv, "model.visual_dim");
  c.adaptor_hidden = get_size(kv, "model.adaptor_hidden");
  c.shared_dim = get_size(kv, "model.shared_dim");
  c.item_dims = {get_size(kv, "model.dim_img"), get_size(kv, "model.dim_cf"),
                 get_size(kv, "model.dim_text")};
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("checkpoint config invalid: ") + e.what());
  }
  return c;
}

const NamedTensor* Container::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) {
      return &t;
    }
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  std::string text;
  for (const auto& [k, v] : c.config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      fail(ErrorKind::Argument, "checkpoint config entry '" + k + "' has a reserved character");
    }
    text += k + "=" + v + "\n";
  }
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  put_bytes(out, text.data(), text.size());
  put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    put_bytes(out, t.name.data(), t.name.size());
    put_u32(out, static_cast<std::uint32_t>(t.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.value.cols()));
    put_bytes(out, t.value.data(), sizeof(float) * static_cast<std::size_t>(t.value.size()));
  }
  return out;
}

Container decode_container(const std::vector<std::uint8_t>& bytes) {
  Cursor in{bytes};
  if (in.str(kMagic.size(), "magic") != kMagic) {
    fail(ErrorKind::Format, "not a checkpoint (bad magic)");
  }
  Container c;
  const std::string text = in.str(in.u32("config length"), "config block");
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Format, "checkpoint config line without '=': " + line);
    }
    c.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const std::uint32_t n = in.u32("tensor count");
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedTensor t;
    t.name = in.str(in.u32("tensor name length"), "tensor name");
    const std::uint32_t rows = in.u32("tensor rows");
    const std::uint32_t cols = in.u32("tensor cols");
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    in.need(count * sizeof(float), "tensor values");
    t.value.resize(rows, cols);
    std::memcpy(t.value.data(), bytes.data() + in.pos, count * sizeof(float));
    in.pos += count * sizeof(float);
    if (!t.value.allFinite()) {
      fail(ErrorKind::Format, "checkpoint tensor " + t.name + " has non-finite values");
    }
    c.tensors.push_back(std::move(t));
  }
  if (in.pos != bytes.size()) {
    fail(ErrorKind::Format, "checkpoint has " + std::to_string(bytes.size() - in.pos) +
                                " trailing bytes at offset " + std::to_string(in.pos));
  }
  return c;
}

void save_container(const Container& c, const std::filesystem::path& path) {
  const auto bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    fail(ErrorKind::Io, "write failed: " + path.string());
  }
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

void append_params(Container& c, const ParamSet<float>& params, const std::string& prefix) {
  const auto& specs = params.lay().specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    c.tensors.push_back({prefix + specs[i].name, params[i]});
  }
}

ParamSet<float> extract_params(const Container& c, std::shared_ptr<const ParamLayout> layout,
                               const std::string& prefix) {
  ParamSet<float> p = zero_params<float>(layout);
  const auto& specs = layout->specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto* t = c.find(prefix + specs[i].name);
    if (t == nullptr) {
      fail(ErrorKind::Format, "checkpoint lacks tensor " + prefix + specs[i].name);
    }
    if (t->value.rows() != specs[i].rows || t->value.cols() != specs[i].cols) {
      fail(ErrorKind::Format, "tensor " + t->name + " has shape " +
                                  std::to_string(t->value.rows()) + "x" +
                                  std::to_string(t->value.cols()) + ", config expects " +
                                  std::to_string(specs[i].rows) + "x" +
                                  std::to_string(specs[i].cols));
    }
    p[i] = t->value;
  }
  return p;
}

Container to_container(const Checkpoint& ckpt) {
  Container c;
  c.config = model_config_entries(ckpt.model);
  for (const auto& [k, v] : ckpt.meta) {
    c.config["meta." + k] = v;
  }
  std::string vocab;
  for (const auto& t : ckpt.vocab.tokens()) {
    if (!vocab.empty()) {
      vocab += ' ';
    }
    vocab += t;
  }
  c.config["vocab"] = vocab;
  append_params(c, ckpt.params);
  return c;
}

Checkpoint from_container(const Container& c) {
  Checkpoint ckpt;
  ckpt.model = model_config_from(c.config);
  const auto it = c.config.find("vocab");
  if (it == c.config.end()) {
    fail(ErrorKind::Format, "checkpoint config lacks 'vocab'");
  }
  std::vector<std::string> tokens;
  std::istringstream words(it->second);
  for (std::string w; words >> w;) {
    tokens.push_back(w);
  }
  ckpt.vocab = Vocabulary::from_tokens(tokens);
  if (ckpt.vocab.size() != ckpt.model.backbone.vocab_size) {
    fail(ErrorKind::Format, "checkpoint vocabulary has " + std::to_string(ckpt.vocab.size()) +
                                " tokens, config says " +
                                std::to_string(ckpt.model.backbone.vocab_size));
  }
  for (const auto& [k, v] : c.config) {
    if (k.rfind("meta.", 0) == 0) {
      ckpt.meta[k.substr(5)] = v;
    }
  }
  ckpt.params = extract_params(c, std::make_shared<const ParamLayout>(ckpt.model));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  save_container(to_container(ckpt), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = load_container(path);
  try {
    return from_container(c);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace ilr
