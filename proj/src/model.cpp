#include "favc/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "favc/common.hpp"
#include "json.hpp"

namespace favc {

using ad::Tensor;

// ---- ArchConfig ---------------------------------------------------------

ArchConfig ArchConfig::toy() {
  ArchConfig c;
  c.T = 256;
  c.stage_widths = {4, 8, 16, 32};
  c.latent_blocks = 4;
  c.embed_dim = 4;
  c.embed_hidden = 8;
  c.attn_hidden = 8;
  c.gat_hidden = 8;
  c.decoder_widths = {16, 8, 4};
  c.scale = 8;
  return c;
}

void ArchConfig::validate() const {
  for (int w : stage_widths)
    if (w <= 0) fail_config("arch: stage widths must be positive");
  for (int k : kernel_sizes)
    if (k <= 0 || k % 2 == 0) fail_config("arch: kernel lengths must be odd");
  if (latent_blocks <= 0 || final_width() % latent_blocks != 0)
    fail_config("arch: final width must be divisible by latent blocks");
  if (embed_dim <= 0 || embed_hidden <= 0 || attn_hidden <= 0 || gat_hidden <= 0)
    fail_config("arch: hidden dims must be positive");
  if (neighbors <= 0 || neighbors >= kNumTargets)
    fail_config("arch: neighbor count out of range");
  if (T < 16) fail_config("arch: T below 16 cannot survive four halvings");
  for (int s = 0; s < 3; ++s)
    if (decoder_widths[static_cast<size_t>(s)] != stage_widths[static_cast<size_t>(2 - s)])
      fail_config("arch: decoder widths must mirror encoder stages for skips");
}

std::string ArchConfig::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["fs"] = fs;
  j["stage_widths"] = stage_widths;
  j["kernel_sizes"] = kernel_sizes;
  j["latent_blocks"] = latent_blocks;
  j["embed_dim"] = embed_dim;
  j["embed_hidden"] = embed_hidden;
  j["attn_hidden"] = attn_hidden;
  j["gat_hidden"] = gat_hidden;
  j["neighbors"] = neighbors;
  j["tau_p"] = tau_p;
  j["lambda_g_init"] = lambda_g_init;
  j["decoder_widths"] = decoder_widths;
  j["scale"] = scale;
  return j.dump();
}

ArchConfig ArchConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ArchConfig c;
  c.T = j.at("T").get<int>();
  c.fs = j.at("fs").get<double>();
  c.stage_widths = j.at("stage_widths").get<std::array<int, 4>>();
  c.kernel_sizes = j.at("kernel_sizes").get<std::array<int, 3>>();
  c.latent_blocks = j.at("latent_blocks").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.embed_hidden = j.at("embed_hidden").get<int>();
  c.attn_hidden = j.at("attn_hidden").get<int>();
  c.gat_hidden = j.at("gat_hidden").get<int>();
  c.neighbors = j.at("neighbors").get<int>();
  c.tau_p = j.at("tau_p").get<double>();
  c.lambda_g_init = j.at("lambda_g_init").get<double>();
  c.decoder_widths = j.at("decoder_widths").get<std::array<int, 3>>();
  c.scale = j.at("scale").get<int>();
  return c;
}

// ---- spatial prior --------------------------------------------------------

SpatialPrior spatial_prior(const Montage& montage, double tau_p, int k_neighbors) {
  SpatialPrior sp;
  std::vector<std::array<double, 2>> pt;
  for (int t : montage.target_idx) pt.push_back(montage.pos2[static_cast<size_t>(t)]);
  const int n = static_cast<int>(pt.size());

  std::vector<double> d2(static_cast<size_t>(n * n), 0.0);
  std::vector<double> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double dx = pt[static_cast<size_t>(a)][0] - pt[static_cast<size_t>(b)][0];
      double dy = pt[static_cast<size_t>(a)][1] - pt[static_cast<size_t>(b)][1];
      d2[static_cast<size_t>(a * n + b)] = dx * dx + dy * dy;
      if (a < b) pairs.push_back(d2[static_cast<size_t>(a * n + b)]);
    }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b && d2[static_cast<size_t>(a * n + b)] < 1e-18)
        fail_config("spatial prior: coincident target electrodes");

  if (tau_p <= 0.0) {
    // lower median pair gets prior exactly 0.5
    std::sort(pairs.begin(), pairs.end());
    double med = pairs[(pairs.size() - 1) / 2];
    tau_p = med / std::log(2.0);
  }
  sp.tau = tau_p;
  sp.p.resize(static_cast<size_t>(n * n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      sp.p[static_cast<size_t>(a * n + b)] = std::exp(-d2[static_cast<size_t>(a * n + b)] / tau_p);

  sp.neighbors.resize(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) {
    std::vector<int> order;
    for (int b = 0; b < n; ++b)
      if (b != a) order.push_back(b);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return sp.p[static_cast<size_t>(a * n + x)] > sp.p[static_cast<size_t>(a * n + y)];
    });
    order.resize(static_cast<size_t>(k_neighbors));
    sp.neighbors[static_cast<size_t>(a)] = order;
  }
  return sp;
}

// ---- parameter construction -------------------------------------------------

namespace {

Tensor xavier(Rng& rng, std::vector<int> shape, int fan_in, int fan_out) {
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor ones(std::vector<int> shape) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = 1.0;
  return t;
}

}  // namespace

FavcNet::FavcNet(ArchConfig cfg, const Montage& montage, uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  prior_ = spatial_prior(montage, cfg_.tau_p, cfg_.neighbors);
  montage_fp_ = montage.fingerprint();
  Rng rng(Rng::mix(seed, 0xFA7C));

  const int C = cfg_.final_width();
  const int B = cfg_.latent_blocks;
  const int zdim = 4 * B;

  // encoder: per stage, three parallel kernels summed, then BN
  int cin = 1;
  for (int s = 0; s < 4; ++s) {
    int cout = cfg_.stage_widths[static_cast<size_t>(s)];
    for (int k : cfg_.kernel_sizes) {
      params_.add("enc.s" + std::to_string(s) + ".k" + std::to_string(k) + ".w",
                  xavier(rng, {cout, cin, k}, cin * k, cout * k), true);
    }
    params_.add("enc.s" + std::to_string(s) + ".bn.gamma", ones({cout}), false);
    params_.add("enc.s" + std::to_string(s) + ".bn.beta", zeros({cout}), false);
    params_.add("enc.s" + std::to_string(s) + ".bn.mean", zeros({cout}), false, false);
    params_.add("enc.s" + std::to_string(s) + ".bn.var", ones({cout}), false, false);
    cin = cout;
  }

  // source-state embedding
  params_.add("embed.w1", xavier(rng, {cfg_.embed_hidden, cfg_.state_dim()}, cfg_.state_dim(), cfg_.embed_hidden), true);
  params_.add("embed.b1", zeros({cfg_.embed_hidden}), false);
  params_.add("embed.bn.gamma", ones({cfg_.embed_hidden}), false);
  params_.add("embed.bn.beta", zeros({cfg_.embed_hidden}), false);
  params_.add("embed.bn.mean", zeros({cfg_.embed_hidden}), false, false);
  params_.add("embed.bn.var", ones({cfg_.embed_hidden}), false, false);
  params_.add("embed.w2", xavier(rng, {cfg_.embed_dim, cfg_.embed_hidden}, cfg_.embed_hidden, cfg_.embed_dim), true);
  params_.add("embed.b2", zeros({cfg_.embed_dim}), false);
  params_.add("embed.ln.gamma", ones({cfg_.embed_dim}), false);
  params_.add("embed.ln.beta", zeros({cfg_.embed_dim}), false);

  // target-private first attention layer + shared second layer
  const int es_dim = cfg_.embed_concat_dim();
  for (int t = 0; t < kNumTargets; ++t) {
    params_.add("attn.t" + std::to_string(t) + ".w",
                xavier(rng, {cfg_.attn_hidden, es_dim}, es_dim, cfg_.attn_hidden), true);
    params_.add("attn.t" + std::to_string(t) + ".b", zeros({cfg_.attn_hidden}), false);
  }
  params_.add("attn.shared.w", xavier(rng, {zdim, cfg_.attn_hidden}, cfg_.attn_hidden, zdim), true);
  params_.add("attn.shared.b", zeros({zdim}), false);

  // GATv2 refinement
  params_.add("gat.ws", xavier(rng, {cfg_.gat_hidden, zdim}, zdim, cfg_.gat_hidden), true);
  params_.add("gat.wu", xavier(rng, {cfg_.gat_hidden, zdim}, zdim, cfg_.gat_hidden), true);
  params_.add("gat.bg", zeros({cfg_.gat_hidden}), false);
  params_.add("gat.ag", xavier(rng, {cfg_.gat_hidden}, cfg_.gat_hidden, 1), true);
  params_.add("gat.wm", xavier(rng, {zdim, zdim}, zdim, zdim), true);
  params_.add("gat.wgamma", xavier(rng, {zdim, 2 * zdim}, 2 * zdim, zdim), true);
  params_.add("gat.bgamma", zeros({zdim}), false);
  params_.add("gat.lambda", Tensor::from({1}, {cfg_.lambda_g_init}), false);

  // decoder: shared adapter, transposed stages, skip adapters, projection
  params_.add("dec.adapter.w", xavier(rng, {C, C, 1}, C, C), true);
  params_.add("dec.adapter.b", zeros({C}), false);
  std::array<int, 5> dw = {C, cfg_.decoder_widths[0], cfg_.decoder_widths[1],
                           cfg_.decoder_widths[2], 1};
  for (int s = 0; s < 4; ++s) {
    params_.add("dec.up" + std::to_string(s) + ".w",
                xavier(rng, {dw[static_cast<size_t>(s)], dw[static_cast<size_t>(s + 1)], 4},
                       dw[static_cast<size_t>(s)] * 4, dw[static_cast<size_t>(s + 1)] * 4),
                true);
    if (s < 3) {
      int w = dw[static_cast<size_t>(s + 1)];
      params_.add("dec.up" + std::to_string(s) + ".bn.gamma", ones({w}), false);
      params_.add("dec.up" + std::to_string(s) + ".bn.beta", zeros({w}), false);
      params_.add("dec.up" + std::to_string(s) + ".bn.mean", zeros({w}), false, false);
      params_.add("dec.up" + std::to_string(s) + ".bn.var", ones({w}), false, false);
      params_.add("dec.skip" + std::to_string(s) + ".w",
                  xavier(rng, {w, w, 1}, w, w), true);
    } else {
      params_.add("dec.up" + std::to_string(s) + ".b", zeros({1}), false);
    }
  }
  params_.add("dec.proj.w", xavier(rng, {1, 1, 1}, 1, 1), true);
  params_.add("dec.proj.b", zeros({1}), false);
}

Tensor FavcNet::p(const std::string& name) {
  auto& entry = params_.at(name);
  if (!active_tape_ || !entry.trainable) return entry.value;
  // locate the taped handle for this entry
  for (size_t i = 0; i < params_.entries().size(); ++i) {
    if (&params_.entries()[i] == &entry) {
      int pos = taped_index_[i];
      return taped_[static_cast<size_t>(pos)];
    }
  }
  fail_config("parameter lookup failed: " + name);
}

std::vector<double>& FavcNet::buffer(const std::string& name) {
  return params_.at(name).value.mutable_values();
}

// ---- forward stages ---------------------------------------------------------

FavcNet::EncoderOut FavcNet::encode(const ad::Tensor& x, bool training) {
  if (x.ndim() != 2 || x.dim(0) != kNumSources)
    fail_shape("encode: expects [4, T] input, got " + shape_str(x.shape()));
  if (x.dim(1) != cfg_.T)
    fail_shape("encode: expected T=" + std::to_string(cfg_.T) + ", got " +
               std::to_string(x.dim(1)));

  EncoderOut out;
  Tensor h = ad::reshape(x, {kNumSources, 1, x.dim(1)});
  for (int s = 0; s < 4; ++s) {
    Tensor mixed;
    bool first = true;
    for (int k : cfg_.kernel_sizes) {
      Tensor branch = ad::conv1d(h, p("enc.s" + std::to_string(s) + ".k" + std::to_string(k) + ".w"), 2, k / 2);
      mixed = first ? branch : ad::add(mixed, branch);
      first = false;
    }
    Tensor bn = ad::batchnorm(mixed, p("enc.s" + std::to_string(s) + ".bn.gamma"),
                              p("enc.s" + std::to_string(s) + ".bn.beta"),
                              buffer("enc.s" + std::to_string(s) + ".bn.mean"),
                              buffer("enc.s" + std::to_string(s) + ".bn.var"),
                              training);
    h = ad::elu(bn);
    out.stages[static_cast<size_t>(s)] = h;
    out.lengths[static_cast<size_t>(s)] = h.dim(2);
  }
  out.deep = h;

  // s_i: per-feature-channel temporal moments and extrema, length 4C
  Tensor tmean = ad::time_mean(h);
  Tensor tstd = ad::time_std(h);
  Tensor tmax = ad::time_max(h);
  Tensor tmin = ad::time_min(h);
  std::vector<Tensor> rows;
  for (int i = 0; i < kNumSources; ++i) {
    Tensor si = ad::concat({ad::select_row(tmean, i), ad::select_row(tstd, i),
                            ad::select_row(tmax, i), ad::select_row(tmin, i)});
    rows.push_back(ad::reshape(si, {1, cfg_.state_dim()}));
  }
  out.state = ad::concat(rows);
  return out;
}

Tensor FavcNet::embed_state(const ad::Tensor& state, bool training) {
  Tensor h = ad::linear(state, p("embed.w1"), p("embed.b1"));
  h = ad::batchnorm(h, p("embed.bn.gamma"), p("embed.bn.beta"),
                    buffer("embed.bn.mean"), buffer("embed.bn.var"), training);
  h = ad::elu(h);
  h = ad::linear(h, p("embed.w2"), p("embed.b2"));
  h = ad::layernorm(h, p("embed.ln.gamma"), p("embed.ln.beta"));
  return ad::reshape(h, {cfg_.embed_concat_dim()});
}

Tensor FavcNet::target_attention(const ad::Tensor& es) {
  if (es.ndim() != 1 || es.dim(0) != cfg_.embed_concat_dim())
    fail_shape("target_attention: bad E_s shape " + shape_str(es.shape()));
  std::vector<Tensor> rows;
  for (int t = 0; t < kNumTargets; ++t) {
    Tensor hidden = ad::elu(ad::linear(es, p("attn.t" + std::to_string(t) + ".w"),
                                       p("attn.t" + std::to_string(t) + ".b")));
    Tensor at = ad::linear(hidden, p("attn.shared.w"), p("attn.shared.b"));
    rows.push_back(ad::reshape(at, {1, cfg_.attn_out_dim()}));
  }
  return ad::concat(rows);
}

Tensor FavcNet::gatv2_refine(const ad::Tensor& z) {
  const int zdim = cfg_.attn_out_dim();
  if (z.ndim() != 2 || z.dim(0) != kNumTargets || z.dim(1) != zdim)
    fail_shape("gatv2_refine: bad node features " + shape_str(z.shape()));
  Tensor zero_dg(std::vector<int>{cfg_.gat_hidden});
  Tensor zero_z(std::vector<int>{zdim});
  Tensor zs = ad::linear(z, p("gat.ws"), p("gat.bg"));  // bias folded here
  Tensor zu = ad::linear(z, p("gat.wu"), zero_dg);
  Tensor zm = ad::linear(z, p("gat.wm"), zero_z);
  Tensor ag = p("gat.ag");
  Tensor lambda = p("gat.lambda");

  std::vector<Tensor> refined;
  for (int t = 0; t < kNumTargets; ++t) {
    const auto& nbrs = prior_.neighbors[static_cast<size_t>(t)];
    Tensor zst = ad::select_row(zs, t);
    std::vector<Tensor> logits;
    for (int u : nbrs) {
      Tensor pre = ad::leaky_relu(ad::add(zst, ad::select_row(zu, u)), 0.2);
      Tensor r = ad::dot(ag, pre);
      Tensor bias = ad::scale(lambda, std::log(prior_.at(t, u) + kEps));
      logits.push_back(ad::add(r, bias));
    }
    Tensor alpha = ad::softmax(ad::concat(logits));  // [k_N]
    std::vector<Tensor> msgs;
    for (int u : nbrs) msgs.push_back(ad::reshape(ad::select_row(zm, u), {1, 1, zdim}));
    Tensor stacked = ad::concat(msgs);  // [k_N, 1, zdim]
    Tensor mt = ad::reshape(
        ad::mix_sources(ad::reshape(alpha, {1, static_cast<int>(nbrs.size()), 1}), stacked),
        {zdim});
    Tensor zt = ad::select_row(z, t);
    Tensor gate = ad::sigmoid(ad::linear(ad::concat({zt, mt}), p("gat.wgamma"), p("gat.bgamma")));
    Tensor zref = ad::add(zt, ad::mul(gate, mt));
    refined.push_back(ad::reshape(zref, {1, zdim}));
  }
  return ad::concat(refined);
}

Tensor FavcNet::decode(const ad::Tensor& mixed, const EncoderOut& enc,
                       const ad::Tensor& skip_weights, bool training) {
  Tensor x = ad::conv1d(mixed, p("dec.adapter.w"), 1, 0);
  x = ad::channel_bias(x, p("dec.adapter.b"));

  Tensor u3 = ad::reshape(skip_weights, {kNumTargets, kNumSources, 1});
  for (int s = 0; s < 3; ++s) {
    int enc_stage = 2 - s;  // widths mirror: 128<-stage2(idx), 64, 32
    int crop = enc.lengths[static_cast<size_t>(enc_stage)];
    x = ad::conv_transpose1d(x, p("dec.up" + std::to_string(s) + ".w"), 2, 1, crop);
    Tensor skip = ad::mix_sources(u3, enc.stages[static_cast<size_t>(enc_stage)]);
    skip = ad::conv1d(skip, p("dec.skip" + std::to_string(s) + ".w"), 1, 0);
    x = ad::add(x, skip);
    x = ad::batchnorm(x, p("dec.up" + std::to_string(s) + ".bn.gamma"),
                      p("dec.up" + std::to_string(s) + ".bn.beta"),
                      buffer("dec.up" + std::to_string(s) + ".bn.mean"),
                      buffer("dec.up" + std::to_string(s) + ".bn.var"), training);
    x = ad::elu(x);
  }
  x = ad::conv_transpose1d(x, p("dec.up3.w"), 2, 1, cfg_.T);
  x = ad::channel_bias(x, p("dec.up3.b"));
  x = ad::conv1d(x, p("dec.proj.w"), 1, 0);
  x = ad::channel_bias(x, p("dec.proj.b"));
  return ad::reshape(x, {kNumTargets, cfg_.T});
}

Tensor FavcNet::forward(const ad::Tensor& x, ad::Tape* tape, bool training,
                        std::vector<ad::Tensor>* taped, ForwardDetail* detail) {
  active_tape_ = tape;
  taped_.clear();
  taped_index_.assign(params_.entries().size(), -1);
  if (tape) {
    for (size_t i = 0; i < params_.entries().size(); ++i) {
      auto& e = params_.entries()[i];
      if (!e.trainable) continue;
      taped_index_[i] = static_cast<int>(taped_.size());
      taped_.push_back(tape->watch(e.value));
    }
  }

  EncoderOut enc = encode(x, training);
  Tensor es = embed_state(enc.state, training);
  Tensor a_raw = target_attention(es);
  Tensor a_ref = gatv2_refine(a_raw);
  Tensor a3 = ad::reshape(a_ref, {kNumTargets, kNumSources, cfg_.latent_blocks});
  Tensor a_norm = ad::signed_l1_normalize(a3);
  Tensor u = ad::time_mean(ad::abs(a_norm));  // [13, 4]
  Tensor mixed = ad::mix_sources(a_norm, enc.deep);
  Tensor y = decode(mixed, enc, u, training);

  if (detail) {
    detail->attention_raw = a_raw;
    detail->attention_refined = a_ref;
    detail->attention_norm = a_norm;
    detail->skip_weights = u;
  }
  if (taped) *taped = taped_;
  active_tape_ = nullptr;
  if (!y.all_finite()) fail_numeric("forward produced non-finite values");
  return y;
}

std::vector<double> FavcNet::predict(const std::vector<double>& x_norm) {
  if (static_cast<int64_t>(x_norm.size()) != static_cast<int64_t>(kNumSources) * cfg_.T)
    fail_shape("predict: expected 4x" + std::to_string(cfg_.T) + " samples");
  Tensor x = Tensor::from({kNumSources, cfg_.T}, x_norm);
  Tensor y = forward(x, nullptr, false);
  return y.values();
}

// ---- checkpoint ---------------------------------------------------------

void save_checkpoint(const std::string& path, const FavcNet& net,
                     const ChannelStats& stats, const TrainMeta& meta) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["arch"] = nlohmann::json::parse(net.config().to_json());
  j["stats"] = nlohmann::json::parse(stats.to_json());
  j["montage_fp"] = net.montage_fingerprint();
  j["meta"] = {{"step", meta.step}, {"best_val", meta.best_val}, {"seed", meta.seed}};
  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : net.params().entries())
    table.push_back({{"name", e.name},
                     {"shape", e.value.shape()},
                     {"decay", e.decay},
                     {"trainable", e.trainable}});
  j["params"] = table;

  std::ofstream f(path, std::ios::binary);
  if (!f) fail_io("cannot write checkpoint " + path);
  f << j.dump() << "\n";
  for (const auto& e : net.params().entries())
    f.write(reinterpret_cast<const char*>(e.value.data()),
            static_cast<std::streamsize>(e.value.size() * sizeof(double)));
}

LoadedCheckpoint load_checkpoint(const std::string& path, const Montage& montage) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_io("cannot open checkpoint " + path);
  std::string header;
  std::getline(f, header);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail_io(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (j.at("format_version").get<int>() != 1)
    fail_io("checkpoint: unsupported format version");

  ArchConfig cfg = ArchConfig::from_json(j.at("arch").dump());
  ChannelStats stats = ChannelStats::from_json(j.at("stats").dump());
  uint64_t fp = j.at("montage_fp").get<uint64_t>();
  if (fp != montage.fingerprint())
    fail_config("checkpoint: montage fingerprint mismatch");

  LoadedCheckpoint out{FavcNet(cfg, montage, 0), stats, TrainMeta{}};
  out.meta.step = j.at("meta").at("step").get<int64_t>();
  out.meta.best_val = j.at("meta").at("best_val").get<double>();
  out.meta.seed = j.at("meta").at("seed").get<uint64_t>();

  const auto& table = j.at("params");
  auto& entries = out.net.params().entries();
  if (table.size() != entries.size())
    fail_io("checkpoint: parameter table size mismatch");
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& row = table[i];
    if (row.at("name").get<std::string>() != entries[i].name)
      fail_io("checkpoint: parameter name mismatch at index " + std::to_string(i));
    auto shape = row.at("shape").get<std::vector<int>>();
    if (shape != entries[i].value.shape())
      fail_io("checkpoint: shape mismatch for " + entries[i].name);
    f.read(reinterpret_cast<char*>(entries[i].value.data()),
           static_cast<std::streamsize>(entries[i].value.size() * sizeof(double)));
    if (f.gcount() != static_cast<std::streamsize>(entries[i].value.size() * sizeof(double)))
      fail_io("checkpoint: truncated parameter blob at " + entries[i].name);
  }
  return out;
}

}  // namespace favc
