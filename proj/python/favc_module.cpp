#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "favc/baselines.hpp"
#include "favc/dataset.hpp"
#include "favc/dsp.hpp"
#include "favc/experiments.hpp"
#include "favc/metrics.hpp"
#include "favc/model.hpp"
#include "favc/perturb.hpp"
#include "favc/stats.hpp"

namespace py = pybind11;
using namespace favc;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Arr& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

Arr matrix(const std::vector<double>& v, int rows, int cols) {
  Arr out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Arr vector_arr(const std::vector<double>& v) {
  Arr out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Segment segment_from(const Arr& sources, double fs) {
  if (sources.ndim() != 2 || sources.shape(0) != kNumSources)
    fail_shape("expected a (4, T) source array");
  Segment s;
  s.subject_id = "py";
  s.fs = fs;
  s.samples = static_cast<int>(sources.shape(1));
  s.sources = to_vec(sources);
  return s;
}

dsp::WelchParams welch_params(int nwin, int hop, double f_lo, double f_hi,
                              int samples) {
  dsp::WelchParams w;
  if (nwin > 0) {
    w.nwin = nwin;
    w.hop = hop > 0 ? hop : nwin / 2;
  } else if (samples < 3 * w.nwin) {
    w.nwin = (samples / 2) & ~1;
    w.hop = w.nwin / 2;
  }
  w.f_lo = f_lo;
  w.f_hi = f_hi;
  return w;
}

// Model plus the training-set statistics it was fitted with.
struct Generator {
  FavcNet net;
  ChannelStats stats;
  Montage montage;

  static Generator load(const std::string& path) {
    Montage m = standard_montage();
    auto ck = load_checkpoint(path, m);
    return Generator{std::move(ck.net), std::move(ck.stats), std::move(m)};
  }

  Arr predict(const Arr& sources, double fs) {
    Segment seg = segment_from(sources, fs);
    auto y = report::predict_targets(net, stats, seg);
    return matrix(y, kNumTargets, seg.samples);
  }

  int64_t param_count() const { return net.param_count(); }
};

}  // namespace

PYBIND11_MODULE(_favc, m) {
  m.doc() = "Frequency-calibrated virtual EEG channel generation";

  py::register_exception<Error>(m, "FavcError");

  m.def("channel_names", [] {
    return std::vector<std::string>(channel_names().begin(), channel_names().end());
  });

  m.def("standard_montage", [] {
    Montage mm = standard_montage();
    py::dict d;
    d["names"] = mm.names;
    py::list p3, p2;
    for (size_t i = 0; i < mm.pos3.size(); ++i) {
      p3.append(py::make_tuple(mm.pos3[i][0], mm.pos3[i][1], mm.pos3[i][2]));
      p2.append(py::make_tuple(mm.pos2[i][0], mm.pos2[i][1]));
    }
    d["pos3"] = p3;
    d["pos2"] = p2;
    d["sources"] = mm.source_idx;
    d["targets"] = mm.target_idx;
    return d;
  });

  m.def(
      "synth_dataset",
      [](uint64_t seed, int n_subjects, int segments_per_subject, int samples,
         double fs) {
        Montage mm = standard_montage();
        SynthConfig cfg;
        cfg.segments_per_subject = segments_per_subject;
        cfg.samples = samples;
        cfg.fs = fs;
        auto segs = synth_dataset(seed, n_subjects, mm, cfg);
        py::list out;
        for (const auto& s : segs) {
          py::dict d;
          d["subject"] = s.subject_id;
          d["fs"] = s.fs;
          d["sources"] = matrix(s.sources, kNumSources, s.samples);
          d["targets"] = matrix(s.targets, kNumTargets, s.samples);
          out.append(d);
        }
        return out;
      },
      py::arg("seed"), py::arg("n_subjects") = 4,
      py::arg("segments_per_subject") = 2, py::arg("samples") = 3000,
      py::arg("fs") = 500.0);

  m.def(
      "bandpass",
      [](const Arr& x, double fs, double lo, double hi) {
        if (x.ndim() != 1) fail_shape("bandpass expects a 1-D array");
        return vector_arr(dsp::bandpass(to_vec(x), fs, lo, hi));
      },
      py::arg("x"), py::arg("fs") = 500.0, py::arg("lo") = 0.5,
      py::arg("hi") = 45.0);

  m.def(
      "welch_psd",
      [](const Arr& x, double fs, int nwin, int hop, double f_lo, double f_hi) {
        int samples = static_cast<int>(x.shape(x.ndim() - 1));
        auto wp = welch_params(nwin, hop, f_lo, f_hi, samples);
        auto freqs = dsp::welch_grid(fs, wp);
        int channels = x.ndim() == 2 ? static_cast<int>(x.shape(0)) : 1;
        auto v = to_vec(x);
        auto est = dsp::welch_psd_multi(v.data(), channels, samples, fs, wp);
        return py::make_tuple(vector_arr(freqs),
                              matrix(est.power, channels, est.bins()));
      },
      py::arg("x"), py::arg("fs") = 500.0, py::arg("nwin") = 0,
      py::arg("hop") = 0, py::arg("f_lo") = 0.5, py::arg("f_hi") = 45.0);

  m.def(
      "nni",
      [](const Arr& sources, double fs) {
        Montage mm = standard_montage();
        Segment s = segment_from(sources, fs);
        return matrix(baselines::nni(s, mm), kNumTargets, s.samples);
      },
      py::arg("sources"), py::arg("fs") = 500.0);

  m.def(
      "idw",
      [](const Arr& sources, double power, double fs) {
        Montage mm = standard_montage();
        Segment s = segment_from(sources, fs);
        return matrix(baselines::idw(s, mm, power), kNumTargets, s.samples);
      },
      py::arg("sources"), py::arg("power") = 2.0, py::arg("fs") = 500.0);

  m.def(
      "spherical_spline",
      [](const Arr& sources, int m_order, int n_max, double ridge, double fs) {
        Montage mm = standard_montage();
        Segment s = segment_from(sources, fs);
        baselines::SplineParams p{m_order, n_max, ridge};
        return matrix(baselines::spherical_spline(s, mm, p), kNumTargets, s.samples);
      },
      py::arg("sources"), py::arg("m") = 4, py::arg("n_max") = 7,
      py::arg("ridge") = 1e-5, py::arg("fs") = 500.0);

  m.def(
      "evaluate",
      [](const Arr& pred, const Arr& truth, const std::vector<double>& sigma,
         double fs, int nwin, int hop) {
        if (pred.ndim() != 2 || truth.ndim() != 2 ||
            pred.shape(0) != kNumTargets || truth.shape(0) != kNumTargets ||
            pred.shape(1) != truth.shape(1))
          fail_shape("evaluate expects matching (13, T) arrays");
        int samples = static_cast<int>(pred.shape(1));
        auto wp = welch_params(nwin, hop, 0.5, 45.0, samples);
        auto pv = to_vec(pred);
        auto tv = to_vec(truth);
        auto row = metrics::evaluate_prediction("py", "py", 0, pv.data(),
                                                tv.data(), samples, sigma, fs, wp);
        py::dict d;
        for (const auto& name : metrics::metric_names())
          d[name.c_str()] = metrics::metric_value(row, name);
        d["sci_pair"] = row.sci_pair;
        d["sci_topo"] = row.sci_topo;
        return d;
      },
      py::arg("pred"), py::arg("truth"),
      py::arg("sigma") = std::vector<double>(kNumTargets, 1.0),
      py::arg("fs") = 500.0, py::arg("nwin") = 0, py::arg("hop") = 0);

  m.def(
      "perturb",
      [](const Arr& sources, const std::string& condition, uint64_t seed,
         int repeat, int segment_index, double fs) {
        Segment s = segment_from(sources, fs);
        Rng rng = perturb::rng_for(seed, condition, repeat, segment_index);
        perturb::PerturbParams params;
        Segment out = perturb::apply(s, perturb::condition_from_name(condition),
                                     params, rng);
        return matrix(out.sources, kNumSources, s.samples);
      },
      py::arg("sources"), py::arg("condition"), py::arg("seed") = 0,
      py::arg("repeat") = 0, py::arg("segment_index") = 0, py::arg("fs") = 500.0);

  m.def("wilcoxon_signed_rank", [](const std::vector<double>& a,
                                   const std::vector<double>& b) {
    auto r = stats::wilcoxon_signed_rank(a, b);
    return py::make_tuple(r.statistic, r.p_value);
  });

  m.def(
      "run",
      [](const std::string& command, const std::string& config_json) {
        auto cfg = report::ExperimentConfig::from_json_text(config_json);
        if (command == "synth")
          report::run_synth(cfg);
        else if (command == "train")
          report::run_train(cfg);
        else if (command == "eval")
          report::run_clean_eval(cfg);
        else if (command == "robust")
          report::run_robustness(cfg);
        else if (command == "sweep")
          report::run_sweep(cfg);
        else if (command == "report")
          report::run_report(cfg);
        else
          fail_config("unknown command: " + command);
      },
      py::arg("command"), py::arg("config_json") = "{}",
      "Run one pipeline stage with a JSON experiment config");

  py::class_<Generator>(m, "Generator")
      .def_static("load", &Generator::load, py::arg("checkpoint"))
      .def("predict", &Generator::predict, py::arg("sources"), py::arg("fs") = 500.0)
      .def_property_readonly("param_count", &Generator::param_count);
}
