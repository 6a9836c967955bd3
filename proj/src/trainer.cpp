#include "favc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "favc/common.hpp"

namespace favc::train {

void TrainConfig::validate() const {
  if (batch_size <= 0 || lr <= 0 || weight_decay < 0 || clip_norm <= 0 ||
      plateau_factor <= 0 || plateau_factor >= 1 || plateau_patience <= 0 ||
      early_stop_patience <= 0 || max_epochs < 0)
    fail_config("train config: all knobs must be positive");
}

double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double ss = 0;
  for (const auto& g : grads)
    for (double v : g) ss += v * v;
  double norm = std::sqrt(ss);
  if (norm > max_norm) {
    double k = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g) v *= k;
  }
  return norm;
}

void OptimState::init(const ad::ParameterSet& params) {
  m.clear();
  v.clear();
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    m.emplace_back(static_cast<size_t>(e.value.size()), 0.0);
    v.emplace_back(static_cast<size_t>(e.value.size()), 0.0);
  }
  step = 0;
}

void adamw_step(ad::ParameterSet& params,
                const std::vector<std::vector<double>>& grads, OptimState& st) {
  size_t ti = 0;
  ++st.step;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    if (ti >= grads.size() || grads[ti].size() != static_cast<size_t>(e.value.size()))
      fail_shape("adamw_step: gradient shape mismatch at " + e.name);
    double* p = e.value.data();
    const auto& g = grads[ti];
    auto& em = st.m[ti];
    auto& ev = st.v[ti];
    double decay = e.decay ? 1.0 - st.lr * st.weight_decay : 1.0;
    for (size_t i = 0; i < g.size(); ++i) {
      p[i] *= decay;
      em[i] = st.beta1 * em[i] + (1.0 - st.beta1) * g[i];
      ev[i] = st.beta2 * ev[i] + (1.0 - st.beta2) * g[i] * g[i];
      double mhat = em[i] / bc1;
      double vhat = ev[i] / bc2;
      p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps_opt);
    }
    ++ti;
  }
}

namespace {
constexpr double kImprove = 1e-6;  // relative improvement threshold

bool improves(double loss, double best, bool has_best) {
  if (!has_best) return false;  // the first observation only sets the baseline
  return loss < best * (1.0 - kImprove);
}
}  // namespace

bool PlateauScheduler::observe(double val_loss, double& lr) {
  if (improves(val_loss, best_, has_best_)) {
    best_ = val_loss;
    bad_ = 0;
    return false;
  }
  if (!has_best_) {
    best_ = val_loss;
    has_best_ = true;
  }
  ++bad_;
  if (bad_ >= patience_) {
    lr *= factor_;
    bad_ = 0;
    return true;
  }
  return false;
}

bool EarlyStop::observe(double val_loss) {
  if (improves(val_loss, best_, has_best_)) {
    best_ = val_loss;
    bad_ = 0;
    return false;
  }
  if (!has_best_) {
    best_ = val_loss;
    has_best_ = true;
  }
  ++bad_;
  return bad_ >= patience_;
}

namespace {

std::vector<double> unit_sigma() {
  return std::vector<double>(kNumTargets, 1.0);
}

struct MemberLoss {
  double total, wave, psd;
};

MemberLoss segment_loss(FavcNet& net, const Segment& seg, const TrainConfig& cfg,
                        ad::Tape* tape, bool training,
                        std::vector<ad::Tensor>* taped, ad::Tensor* total_out) {
  ad::Tensor x = ad::Tensor::from({kNumSources, seg.samples}, seg.sources);
  ad::Tensor y = ad::Tensor::from({kNumTargets, seg.samples}, seg.targets);
  ad::Tensor pred = net.forward(x, tape, training, taped);
  ad::Tensor wave = metrics::wave_loss(pred, y, unit_sigma());
  MemberLoss out{0, wave.value(), 0};
  ad::Tensor total = ad::scale(wave, cfg.loss.w_wave);
  if (cfg.loss.w_psd > 0) {
    ad::Tensor psd = metrics::psd_loss(pred, y, cfg.loss, seg.fs, cfg.welch);
    out.psd = psd.value();
    total = ad::add(total, ad::scale(psd, cfg.loss.w_psd));
  }
  out.total = total.value();
  if (total_out) *total_out = total;
  return out;
}

}  // namespace

LossTriple dataset_loss(FavcNet& net, const std::vector<Segment>& segments_norm,
                        const TrainConfig& cfg) {
  if (segments_norm.empty()) fail_config("dataset_loss: empty segment set");
  LossTriple acc;
  for (const auto& seg : segments_norm) {
    MemberLoss ml = segment_loss(net, seg, cfg, nullptr, false, nullptr, nullptr);
    acc.total += ml.total;
    acc.wave += ml.wave;
    acc.psd += ml.psd;
  }
  double n = static_cast<double>(segments_norm.size());
  acc.total /= n;
  acc.wave /= n;
  acc.psd /= n;
  return acc;
}

std::string TrainResult::log_csv() const {
  std::ostringstream os;
  os << "epoch,lr,train_total,train_wave,train_psd,val_total,val_wave,val_psd\n";
  for (const auto& e : log) {
    os << e.epoch << "," << fmt_double(e.lr) << "," << fmt_double(e.train_total)
       << "," << fmt_double(e.train_wave) << "," << fmt_double(e.train_psd)
       << "," << fmt_double(e.val_total) << "," << fmt_double(e.val_wave) << ","
       << fmt_double(e.val_psd) << "\n";
  }
  return os.str();
}

TrainResult fit(FavcNet& net, const std::vector<Segment>& train_norm,
                  const std::vector<Segment>& val_norm, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_norm.empty() || val_norm.empty())
    fail_config("train: empty train or validation set");
  for (const auto& s : train_norm)
    if (!s.has_targets()) fail_config("train: segment without targets");

  // subject-disjoint guard
  auto train_subjects = subjects_of(train_norm);
  auto val_subjects = subjects_of(val_norm);
  for (const auto& s : val_subjects)
    if (std::find(train_subjects.begin(), train_subjects.end(), s) != train_subjects.end())
      fail_config("train: subject " + s + " appears in both train and val");

  OptimState opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  opt.init(net.params());
  PlateauScheduler scheduler(cfg.plateau_factor, cfg.plateau_patience);
  EarlyStop stopper(cfg.early_stop_patience);

  TrainResult result;
  std::vector<std::vector<double>> best_params;
  auto snapshot = [&]() {
    best_params.clear();
    for (const auto& e : net.params().entries())
      best_params.push_back(e.value.values());
  };
  auto restore = [&]() {
    size_t i = 0;
    for (auto& e : net.params().entries()) {
      std::copy(best_params[i].begin(), best_params[i].end(), e.value.data());
      ++i;
    }
  };

  std::vector<int> order(train_norm.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  const size_t n_trainable = opt.m.size();
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(cfg.seed, 0xE40C + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double ep_total = 0, ep_wave = 0, ep_psd = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<std::vector<double>> grads(n_trainable);
      {
        size_t ti = 0;
        for (const auto& e : net.params().entries()) {
          if (!e.trainable) continue;
          grads[ti].assign(static_cast<size_t>(e.value.size()), 0.0);
          ++ti;
        }
      }
      double members = static_cast<double>(stop - start);
      for (size_t k = start; k < stop; ++k) {
        const Segment& seg = train_norm[static_cast<size_t>(order[k])];
        ad::Tape tape;
        std::vector<ad::Tensor> taped;
        ad::Tensor total;
        MemberLoss ml = segment_loss(net, seg, cfg, &tape, true, &taped, &total);
        if (!std::isfinite(ml.total))
          fail_numeric("train: non-finite loss at epoch " + std::to_string(epoch) +
                       ", subject " + seg.subject_id +
                       " (wave=" + fmt_double(ml.wave) + ", psd=" + fmt_double(ml.psd) + ")");
        tape.backward(total);
        for (size_t ti = 0; ti < taped.size(); ++ti) {
          const auto& g = tape.grad(taped[ti]);
          for (size_t i = 0; i < g.size(); ++i)
            grads[ti][i] += g[i] / members;
        }
        ep_total += ml.total;
        ep_wave += ml.wave;
        ep_psd += ml.psd;
        ++result.steps;
      }
      clip_global_norm(grads, cfg.clip_norm);
      adamw_step(net.params(), grads, opt);
    }

    LossTriple val = dataset_loss(net, val_norm, cfg);
    EpochLog lg;
    lg.epoch = epoch;
    lg.lr = opt.lr;
    double nb = static_cast<double>(train_norm.size());
    lg.train_total = ep_total / nb;
    lg.train_wave = ep_wave / nb;
    lg.train_psd = ep_psd / nb;
    lg.val_total = val.total;
    lg.val_wave = val.wave;
    lg.val_psd = val.psd;
    result.log.push_back(lg);
    if (on_epoch) on_epoch(lg);

    if (result.best_epoch < 0 || val.total < result.best_val) {
      result.best_val = val.total;
      result.best_epoch = epoch;
      snapshot();
    }
    scheduler.observe(val.total, opt.lr);
    if (stopper.observe(val.total)) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.best_epoch >= 0) restore();
  return result;
}

}  // namespace favc::train
