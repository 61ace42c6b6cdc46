// Python surface: configs as dicts, bulk data as numpy arrays.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <span>

#include <json.hpp>

#include "cinp/checkpoint.hpp"
#include "cinp/config.hpp"
#include "cinp/error.hpp"
#include "cinp/evalkit.hpp"
#include "cinp/objectives.hpp"
#include "cinp/pipeline.hpp"
#include "cinp/prompting.hpp"
#include "cinp/synthdata.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

cinp::Config config_arg(const py::object& o) {
    if (o.is_none()) return cinp::desk_config();
    return cinp::config_from_json(from_py(o));
}

Array array_from(const std::vector<double>& values, std::vector<py::ssize_t> shape) {
    Array out(shape);
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::dict metrics_dict(const cinp::MetricsReport& m) { return to_py(cinp::metrics_to_json(m)); }

// Stacked arrays of a cohort.
py::dict cohort_dict(const std::vector<cinp::PairedSample>& c) {
    py::dict out;
    if (c.empty()) return out;
    const auto n = static_cast<py::ssize_t>(c.size());
    const auto& dims = c[0].volume.dims;
    const auto rois = static_cast<py::ssize_t>(c[0].bold.n_rois);
    const auto t = static_cast<py::ssize_t>(c[0].bold.n_timepoints);
    Array vol({n, py::ssize_t(dims.d), py::ssize_t(dims.h), py::ssize_t(dims.w)});
    Array bold({n, rois, t});
    Array fcn({n, rois, rois});
    std::vector<int> labels;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::copy(c[i].volume.voxels.begin(), c[i].volume.voxels.end(), vol.mutable_data() + i * dims.voxels());
        std::copy(c[i].bold.signals.begin(), c[i].bold.signals.end(), bold.mutable_data() + i * rois * t);
        std::copy(c[i].fcn.matrix.begin(), c[i].fcn.matrix.end(), fcn.mutable_data() + i * rois * rois);
        labels.push_back(c[i].label);
        ids.push_back(c[i].subject_id);
    }
    out["volumes"] = vol;
    out["bold"] = bold;
    out["fcn"] = fcn;
    out["labels"] = labels;
    out["subject_ids"] = ids;
    return out;
}

py::dict embeddings_dict(const cinp::EmbeddingSet& set) {
    py::dict out;
    const auto n = static_cast<py::ssize_t>(set.n), d = static_cast<py::ssize_t>(set.d);
    out["image"] = array_from(set.image, {n, d});
    out["network"] = array_from(set.network, {n, d});
    out["labels"] = set.labels;
    out["subject_ids"] = set.subject_ids;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Contrastive image/network pretraining on synthetic cohorts";

    // Library errors surface as CinpError with the error code as `.code`.
    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
    error_type.call_once_and_store_result([&] { return py::object(py::exception<cinp::Error>(m, "CinpError")); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const cinp::Error& e) {
            const py::object& type = error_type.get_stored();
            py::object exc = type(std::string(e.what()));
            exc.attr("code") = std::string(cinp::to_string(e.code()));
            PyErr_SetObject(type.ptr(), exc.ptr());
        }
    });

    m.def("desk_config", [] { return to_py(cinp::config_to_json(cinp::desk_config())); });
    m.def("paper_config", [] { return to_py(cinp::config_to_json(cinp::paper_config())); });
    m.def("load_config", [](const std::string& path) { return to_py(cinp::config_to_json(cinp::load_config(path))); },
          py::arg("path"));
    m.def("validate_config", [](const py::object& cfg) { return to_py(cinp::config_to_json(config_arg(cfg))); },
          py::arg("config"), "Fill defaults and validate; returns the complete config.");

    m.def("gen_cohort", [](const py::object& cfg) { return cohort_dict(cinp::gen_paired_cohort(config_arg(cfg).cohort)); },
          py::arg("config") = py::none());
    m.def("import_cohort", [](const std::string& dir) { return cohort_dict(cinp::import_cohort(dir).samples); },
          py::arg("dir"));
    m.def("export_cohort",
          [](const py::object& cfg, const std::string& dir) {
              const cinp::Config c = config_arg(cfg);
              cinp::export_cohort(dir, {c.cohort, cinp::gen_paired_cohort(c.cohort)});
          },
          py::arg("config"), py::arg("dir"));

    m.def("bold_to_fcn",
          [](const Array& bold) {
              if (bold.ndim() != 2) throw cinp::Error(cinp::ErrorCode::ShapeMismatch, "bold must be rois x time");
              const auto r = bold.shape(0), t = bold.shape(1);
              const cinp::Fcn f = cinp::bold_to_fcn({std::size_t(r), std::size_t(t), flat(bold)});
              return array_from(f.matrix, {r, r});
          },
          py::arg("bold"));
    m.def("mask_indices",
          [](std::size_t n, double ratio, std::uint64_t seed) { return cinp::mask_indices(n, {ratio, seed}); },
          py::arg("n_voxels"), py::arg("ratio") = 0.30, py::arg("seed") = 0);

    py::class_<cinp::Checkpoint>(m, "Checkpoint")
        .def_readonly("step", &cinp::Checkpoint::step)
        .def_property_readonly("config", [](const cinp::Checkpoint& c) { return to_py(cinp::config_to_json(c.config)); })
        .def("save", [](const cinp::Checkpoint& c, const std::string& path) { cinp::save_checkpoint(path, c); },
             py::arg("path"))
        .def("parameters", [](const cinp::Checkpoint& c) {
            py::dict out;
            for (const auto& [name, t] : c.params.named()) {
                std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
                out[py::str(name)] = array_from(std::vector<double>(t.data().begin(), t.data().end()), shape);
            }
            return out;
        });
    m.def("load_checkpoint", [](const std::string& path) { return cinp::load_checkpoint(path); }, py::arg("path"));

    m.def("pretrain",
          [](const py::object& cfg) {
              const cinp::Config c = config_arg(cfg);
              const auto cohort = cinp::gen_paired_cohort(c.cohort);
              std::vector<int> labels;
              for (const auto& s : cohort) labels.push_back(s.label);
              std::vector<cinp::PairedSample> train;
              for (std::size_t i : cinp::pretrain_indices(labels, c)) train.push_back(cohort[i]);
              cinp::TrainResult result;
              {
                  py::gil_scoped_release release;
                  result = cinp::pretrain(train, c);
              }
              py::list history;
              for (const auto& r : result.history) history.append(to_py(json::parse(cinp::loss_report_jsonl(r))));
              return py::make_tuple(std::move(result.checkpoint), history);
          },
          py::arg("config") = py::none(),
          "Generate the config's cohort, pretrain on its non-test subjects; returns (checkpoint, history).");

    m.def("embed",
          [](const cinp::Checkpoint& ckpt) {
              const auto cohort = cinp::gen_paired_cohort(ckpt.config.cohort);
              return embeddings_dict(cinp::embed_cohort(cohort, ckpt.params, ckpt.config));
          },
          py::arg("checkpoint"), "Embed the checkpoint's own cohort.");
    m.def("evaluate",
          [](const cinp::Checkpoint& ckpt, std::size_t r, double fcn_fraction) {
              const auto cohort = cinp::gen_paired_cohort(ckpt.config.cohort);
              const auto set = cinp::embed_cohort(cohort, ckpt.params, ckpt.config);
              py::dict out;
              out["probe"] = metrics_dict(cinp::run_probe(set, ckpt.config).metrics);
              out["prompt"] = metrics_dict(cinp::run_prompt(set, ckpt.config, r, fcn_fraction).metrics);
              return out;
          },
          py::arg("checkpoint"), py::arg("r") = 5, py::arg("fcn_fraction") = 0.10);

    m.def("build_reference_set",
          [](const std::vector<Array>& by_class, std::size_t r, std::uint64_t seed) {
              std::vector<cinp::ClassBank> banks(by_class.size());
              for (std::size_t c = 0; c < by_class.size(); ++c) {
                  const auto& a = by_class[c];
                  if (a.ndim() != 2) throw cinp::Error(cinp::ErrorCode::ShapeMismatch, "each class needs an n x d array");
                  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                      banks[c].embeddings.emplace_back(a.data(i, 0), a.data(i, 0) + a.shape(1));
                  }
              }
              const auto refs = cinp::build_reference_set(banks, r, seed);
              return array_from(refs.refs, {py::ssize_t(refs.k), py::ssize_t(refs.r), py::ssize_t(refs.dim)});
          },
          py::arg("embeddings_by_class"), py::arg("r"), py::arg("seed") = 0,
          "Returns a k x r x d array of group-level references.");
    m.def("prompt_classify",
          [](const Array& v, const Array& refs) {
              if (refs.ndim() != 3) throw cinp::Error(cinp::ErrorCode::ShapeMismatch, "refs must be k x r x d");
              cinp::ReferenceSet set;
              set.k = std::size_t(refs.shape(0));
              set.r = std::size_t(refs.shape(1));
              set.dim = std::size_t(refs.shape(2));
              set.refs = flat(refs);
              const auto res = cinp::prompt_classify(flat(v), set);
              py::dict out;
              out["predicted"] = res.predicted;
              out["class_mean"] = res.class_mean;
              out["table"] = array_from(res.table, {py::ssize_t(set.k), py::ssize_t(set.r)});
              return out;
          },
          py::arg("v"), py::arg("refs"));

    m.def("metrics",
          [](const std::vector<int>& preds, const std::vector<int>& labels, std::size_t k,
             std::optional<std::vector<double>> scores) {
              if (scores) return metrics_dict(cinp::metrics_compute(preds, labels, k, std::span<const double>(*scores)));
              return metrics_dict(cinp::metrics_compute(preds, labels, k));
          },
          py::arg("preds"), py::arg("labels"), py::arg("k"), py::arg("scores") = py::none());
    m.def("auc", [](const std::vector<double>& s, const std::vector<int>& y) { return cinp::auc_score(s, y); },
          py::arg("scores"), py::arg("labels"));
    m.def("split_dataset",
          [](const std::vector<int>& labels, std::uint64_t seed, bool stratified) {
              cinp::SplitSpec spec;
              spec.seed = seed;
              spec.stratified = stratified;
              const auto s = cinp::split_dataset(labels, spec);
              return py::make_tuple(s.train, s.val, s.test);
          },
          py::arg("labels"), py::arg("seed") = 0, py::arg("stratified") = true);
    m.def("linear_probe_accuracy",
          [](const Array& x_train, const std::vector<int>& y_train, const Array& x_test, const std::vector<int>& y_test,
             double l2) {
              if (x_train.ndim() != 2 || x_test.ndim() != 2 || x_train.shape(1) != x_test.shape(1)) {
                  throw cinp::Error(cinp::ErrorCode::ShapeMismatch, "probe inputs must be n x d with equal d");
              }
              if (y_train.empty() || y_test.empty()) {
                  throw cinp::Error(cinp::ErrorCode::TooFewSamples, "probe needs training and test samples");
              }
              const std::size_t d = std::size_t(x_train.shape(1));
              const int k = 1 + std::max(*std::max_element(y_train.begin(), y_train.end()),
                                         *std::max_element(y_test.begin(), y_test.end()));
              cinp::ProbeCfg cfg;
              cfg.l2 = l2;
              const auto probe = cinp::linear_probe_fit(flat(x_train), std::size_t(x_train.shape(0)), d, y_train,
                                                        std::size_t(k), cfg);
              std::vector<int> preds;
              for (py::ssize_t i = 0; i < x_test.shape(0); ++i) {
                  preds.push_back(probe.predict(std::span<const double>(x_test.data(i, 0), d)));
              }
              return metrics_dict(cinp::metrics_compute(preds, y_test, std::size_t(k)));
          },
          py::arg("x_train"), py::arg("y_train"), py::arg("x_test"), py::arg("y_test"), py::arg("l2") = 1e-3);
}
