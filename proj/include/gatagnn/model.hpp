#pragma once

// Encoder + relation module + prediction head, for the six model variants,
// and the binary checkpoint format.

#include <bit>
#include <boost/crc.hpp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gatagnn/autodiff.hpp"
#include "gatagnn/data.hpp"
#include "gatagnn/errors.hpp"
#include "gatagnn/recurrent.hpp"
#include "gatagnn/relation.hpp"

namespace gatagnn {

enum class Variant { GRU, LSTM, GRU_GAT, LSTM_GAT, CORR_COS, GAT_AGNN };
enum class Task { classification, regression };
enum class RegressionHead { relu, linear };

inline constexpr Variant kAllVariants[] = {Variant::LSTM,     Variant::LSTM_GAT, Variant::GRU,
                                           Variant::GRU_GAT,  Variant::CORR_COS, Variant::GAT_AGNN};

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::GRU: return "GRU";
    case Variant::LSTM: return "LSTM";
    case Variant::GRU_GAT: return "GRU_GAT";
    case Variant::LSTM_GAT: return "LSTM_GAT";
    case Variant::CORR_COS: return "CORR_COS";
    case Variant::GAT_AGNN: return "GAT_AGNN";
  }
  return "?";
}
inline const char* to_string(Task t) { return t == Task::classification ? "classification" : "regression"; }
inline const char* to_string(RegressionHead h) { return h == RegressionHead::relu ? "relu" : "linear"; }

inline Variant parse_variant(const std::string& s) {
  for (Variant v : kAllVariants)
    if (s == to_string(v)) return v;
  throw ConfigError("unknown model variant: " + s);
}
inline Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "regression") return Task::regression;
  throw ConfigError("unknown task: " + s);
}
inline RegressionHead parse_regression_head(const std::string& s) {
  if (s == "relu") return RegressionHead::relu;
  if (s == "linear") return RegressionHead::linear;
  throw ConfigError("unknown regression head: " + s);
}

struct ModelConfig {
  Variant variant = Variant::GAT_AGNN;
  Task task = Task::regression;
  std::size_t hidden = 32;  // d
  std::size_t window = 20;  // T
  std::size_t heads = 2;    // M
  RegressionHead regression_head = RegressionHead::relu;
  std::uint64_t seed = 0;
  std::size_t features = kNumFeatures;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline EncoderKind encoder_kind(Variant v) {
  return (v == Variant::LSTM || v == Variant::LSTM_GAT) ? EncoderKind::lstm : EncoderKind::gru;
}
inline std::optional<RelationKind> relation_kind(Variant v) {
  switch (v) {
    case Variant::GRU:
    case Variant::LSTM: return std::nullopt;
    case Variant::GRU_GAT:
    case Variant::LSTM_GAT: return RelationKind::gat;
    case Variant::CORR_COS: return RelationKind::corr_cos;
    case Variant::GAT_AGNN: return RelationKind::gat_agnn;
  }
  return std::nullopt;
}

inline void validate(const ModelConfig& c) {
  if (c.hidden < 2) throw ConfigError("hidden size must be >= 2");
  if (c.window < 1) throw ConfigError("window must be >= 1");
  if (c.features < 1) throw ConfigError("feature count must be >= 1");
  if (relation_kind(c.variant)) head_width(c.hidden, c.heads);
  else if (c.heads < 1) throw ConfigError("number of heads must be >= 1");
}

/// Stable one-line text form, embedded in checkpoints and digested in reports.
inline std::string serialize(const ModelConfig& c) {
  std::ostringstream os;
  os << "variant=" << to_string(c.variant) << ";task=" << to_string(c.task) << ";hidden=" << c.hidden
     << ";window=" << c.window << ";heads=" << c.heads << ";regression_head=" << to_string(c.regression_head)
     << ";seed=" << c.seed << ";features=" << c.features;
  return os.str();
}

inline ModelConfig deserialize_model_config(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string kv;
  auto to_size = [](const std::string& v) {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw ConfigError("bad integer in model config: " + v);
    return static_cast<std::size_t>(n);
  };
  try {
    while (std::getline(is, kv, ';')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("bad model config entry: " + kv);
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "variant") c.variant = parse_variant(v);
      else if (k == "task") c.task = parse_task(v);
      else if (k == "hidden") c.hidden = to_size(v);
      else if (k == "window") c.window = to_size(v);
      else if (k == "heads") c.heads = to_size(v);
      else if (k == "regression_head") c.regression_head = parse_regression_head(v);
      else if (k == "seed") c.seed = to_size(v);
      else if (k == "features") c.features = to_size(v);
      else throw ConfigError("unknown model config key: " + k);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("malformed model config: " + text);
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ForecastModel {
  ModelConfig config;
  Encoder encoder;
  std::vector<RelationHeadParams> heads;  // empty for GRU / LSTM
  Parameter W_head;                       // out × (d + relation width)
  Parameter b_head;                       // 1 × out

  std::size_t relation_width() const {
    std::size_t w = 0;
    for (const auto& h : heads) w += h.out_width();
    return w;
  }
  std::size_t outputs() const { return config.task == Task::classification ? 2 : 1; }

  /// Deterministic order: encoder, relation heads, prediction head.
  std::vector<Parameter*> parameters() {
    auto out = encoder.parameters();
    for (auto& h : heads)
      for (Parameter* p : h.parameters()) out.push_back(p);
    out.push_back(&W_head);
    out.push_back(&b_head);
    return out;
  }
  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<ForecastModel*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.size();
    return n;
  }
};

inline ForecastModel build(const ModelConfig& config) {
  validate(config);
  Rng rng(config.seed);
  ForecastModel m;
  m.config = config;
  const std::size_t d = config.hidden;
  m.encoder = Encoder::init(encoder_kind(config.variant), d, config.features, rng);
  if (auto kind = relation_kind(config.variant)) {
    const std::size_t dv = head_width(d, config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) m.heads.push_back(RelationHeadParams::init(*kind, d, dv, h, rng));
  }
  const std::size_t in = d + m.relation_width();
  m.W_head = {"head.W", uniform_init(m.outputs(), in, in, rng)};
  m.b_head = {"head.b", Tensor(1, m.outputs())};
  return m;
}

/// Outputs of one forward pass as tape handles.
struct ForwardGraph {
  Var output;  // N×1 (regression) or N×2 class probabilities
  Var H;
  std::optional<RelationGraph> relation;
};

struct ForwardOptions {
  bool trainable = true;
  /// Replace the relation output by zeros before the head (wiring checks).
  bool zero_relation = false;
};

inline ForwardGraph forward_graph(Tape& t, ForecastModel& m, const WindowSample& s, ForwardOptions opt = {}) {
  if (s.steps.size() != m.config.window)
    throw DimensionError("sample window " + std::to_string(s.steps.size()) + " does not match model window " +
                         std::to_string(m.config.window));
  if (!s.steps.empty() && s.steps.front().cols() != m.config.features)
    throw DimensionError("sample has " + std::to_string(s.steps.front().cols()) + " features, model expects " +
                         std::to_string(m.config.features));
  auto leaf = [&](Parameter& p) { return opt.trainable ? t.param(p) : t.constant(p.value); };
  ForwardGraph g;
  g.H = encode(t, m.encoder, s.steps, opt.trainable);
  Var z = g.H;
  if (auto kind = relation_kind(m.config.variant)) {
    if (g.H.rows() < 2)
      throw DegenerateGraphError("relation variants need at least 2 companies, got " + std::to_string(g.H.rows()));
    g.relation = relation_forward(t, *kind, g.H, m.heads, opt.trainable);
    Var v = opt.zero_relation ? t.constant(Tensor(g.H.rows(), m.relation_width())) : g.relation->V;
    z = concat_cols({g.H, v});
  }
  Var logits = add_row(matmul_nt(z, leaf(m.W_head)), leaf(m.b_head));
  if (m.config.task == Task::classification) g.output = softmax_rows(logits);
  else g.output = m.config.regression_head == RegressionHead::relu ? relu(logits) : logits;
  return g;
}

struct PredictionBatch {
  Tensor output;  // N×1 returns or N×2 probabilities
  Tensor H;
  std::optional<Tensor> V;
  std::vector<AttentionWeights> attention;  // one entry per head; G empty for GAT-only

  /// Regression value or class-1 probability of company i.
  double score(std::size_t i) const { return output.cols() == 2 ? output(i, 1) : output(i, 0); }
};

inline PredictionBatch forward(const ForecastModel& model, const WindowSample& s, ForwardOptions opt = {}) {
  Tape t;
  opt.trainable = false;
  auto& m = const_cast<ForecastModel&>(model);  // constants only: parameters are read, never bound
  const ForwardGraph g = forward_graph(t, m, s, opt);
  PredictionBatch b;
  b.output = g.output.value();
  b.H = g.H.value();
  if (g.relation) {
    b.V = g.relation->V.value();
    for (std::size_t h = 0; h < g.relation->Q.size(); ++h)
      b.attention.push_back({g.relation->Q[h].value(), h < g.relation->G.size() ? g.relation->G[h].value() : Tensor{}});
  }
  return b;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
//
// Layout (little-endian):
//   "GATAGNN\0"                       8 bytes magic
//   u32 version                       kCheckpointVersion
//   u32 config digest                 CRC-32 of the config text
//   u32 config length, config bytes   serialize(ModelConfig)
//   u32 parameter count
//   per parameter: u32 name length, name, u64 rows, u64 cols, rows·cols f64
//   u32 checksum                      CRC-32 of every preceding byte

inline constexpr char kCheckpointMagic[8] = {'G', 'A', 'T', 'A', 'G', 'N', 'N', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace detail {
template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline std::string encode_checkpoint(const ForecastModel& m) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::string cfg = serialize(m.config);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, crc32(cfg));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  const auto params = m.parameters();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    detail::put<std::uint64_t>(out, p->value.rows());
    detail::put<std::uint64_t>(out, p->value.cols());
    for (double v : p->value.data()) detail::put<double>(out, v);
  }
  detail::put<std::uint32_t>(out, crc32(out));
  return out;
}

/// Decodes a checkpoint. When `expected` is given, the embedded config must
/// produce the same parameter shapes.
inline ForecastModel decode_checkpoint(std::string_view bytes, const std::optional<ModelConfig>& expected = {}) {
  if (bytes.size() < sizeof kCheckpointMagic + 4 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    if (bytes.size() >= sizeof kCheckpointMagic && std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) == 0)
      throw CheckpointError("checksum failure: checkpoint truncated");
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (crc32(body) != stored) throw CheckpointError("checksum failure: checkpoint is corrupted or truncated");

  detail::Reader r(body);
  r.take(sizeof kCheckpointMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto digest = r.get<std::uint32_t>();
  const std::string cfg(r.take(r.get<std::uint32_t>()));
  if (crc32(cfg) != digest) throw CheckpointError("config digest mismatch");
  ModelConfig config;
  try {
    config = deserialize_model_config(cfg);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid embedded config: ") + e.what());
  }

  ForecastModel reference = build(expected.value_or(config));
  ForecastModel m = build(config);
  auto params = m.parameters();
  auto ref_params = reference.parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " parameters, config implies " +
                          std::to_string(params.size()));
  for (std::size_t k = 0; k < count; ++k) {
    const std::string name(r.take(r.get<std::uint32_t>()));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (name != params[k]->name)
      throw CheckpointError("unexpected parameter '" + name + "', expected '" + params[k]->name + "'");
    auto check = [&](const Parameter& want) {
      if (k >= ref_params.size() || want.name != name || rows != want.value.rows() || cols != want.value.cols())
        throw CheckpointError("shape mismatch for parameter " + name + ": file has " +
                              Tensor::shape_string(rows, cols) + ", expected " + want.value.shape());
    };
    check(*params[k]);
    if (expected) check(k < ref_params.size() ? *ref_params[k] : *params[k]);
    Tensor value(rows, cols);
    for (double& v : value.data()) v = r.get<double>();
    params[k]->value = std::move(value);
    params[k]->zero_grad();
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after parameter records");
  return m;
}

inline void save_checkpoint(const ForecastModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  const std::string bytes = encode_checkpoint(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

inline ForecastModel load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), expected);
}

}  // namespace gatagnn
