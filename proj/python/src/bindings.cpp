#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "atesa/corpus.hpp"
#include "atesa/ensemble.hpp"
#include "atesa/errors.hpp"
#include "atesa/eval.hpp"
#include "atesa/pipeline.hpp"
#include "atesa/service.hpp"
#include "atesa/training.hpp"

namespace py = pybind11;
using namespace atesa;

// Structured results cross the boundary as JSON text; the Python package
// decodes them into plain dicts.

namespace {

std::vector<TaggedExample> examples_from_lines(const std::vector<std::string>& lines) {
  std::vector<TaggedExample> out;
  for (const std::string& l : lines) out.push_back(from_json_line(l));
  return out;
}

std::string train_head(const std::string& head, const std::string& branch,
                       const std::vector<std::string>& train_lines, const std::string& out_dir,
                       int hidden_size, std::uint64_t encoder_seed, int epochs, int batch_size,
                       double learning_rate, std::uint64_t seed, int lstm_units,
                       double dropout) {
  EncoderSpec spec;
  spec.hidden_size = hidden_size;
  spec.seed = encoder_seed;
  Encoder encoder = Encoder::create(spec);
  HeadConfig hc = HeadConfig::make(parse_head_kind(head), parse_branch(branch), hidden_size);
  hc.lstm_units = lstm_units;
  hc.dropout_rate = dropout;
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.learning_rate = learning_rate;
  tc.seed = seed;
  const auto train = examples_from_lines(train_lines);
  const ModelCheckpoint ckpt = train_model(hc, encoder, train, {}, tc, true, "python");
  ckpt.save(out_dir);
  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& r : ckpt.history) {
    history.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"train_accuracy", r.train_accuracy}});
  }
  return history.dump();
}

}  // namespace

PYBIND11_MODULE(_atesa, m) {
  m.doc() = "Aspect term extraction and aspect sentiment tagging";

  static py::exception<Error> error(m, "AtesaError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("tokenize", [](const std::string& text) {
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
    for (const Token& t : tokenize(text)) out.emplace_back(t.text, t.begin, t.end);
    return out;
  }, py::arg("text"));

  m.def("spans_to_iob", [](const std::vector<std::pair<std::size_t, std::size_t>>& spans,
                           std::size_t length) {
    std::vector<AspectSpan> s;
    for (const auto& [a, b] : spans) s.push_back({a, b});
    return encode_labels(spans_to_iob(s, length));
  }, py::arg("spans"), py::arg("length"));

  m.def("iob_to_spans", [](const std::vector<int>& codes) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const AspectSpan& s : iob_to_spans(decode_iob(codes))) out.emplace_back(s.start, s.end);
    return out;
  }, py::arg("codes"));

  m.def("_corpus_examples", [](const std::string& xml, const std::string& format) {
    std::vector<std::string> out;
    for (const TaggedExample& ex : label_corpus(parse_corpus(xml, parse_corpus_format(format)))) {
      out.push_back(to_json_line(ex));
    }
    return out;
  }, py::arg("xml"), py::arg("format"));

  m.def("_corpus_stats", [](const std::string& xml, const std::string& format, std::size_t top_n) {
    return stats_to_json(compute_stats(parse_corpus(xml, parse_corpus_format(format))), top_n);
  }, py::arg("xml"), py::arg("format"), py::arg("top_n") = 10);

  m.def("_split", [](const std::vector<std::string>& lines, double train_fraction,
                     double validation_fraction, std::uint64_t seed) {
    SplitConfig cfg{train_fraction, validation_fraction, seed};
    const SplitIndices idx = stratified_split_indices(examples_from_lines(lines), cfg);
    return std::make_tuple(idx.train, idx.validation, idx.test);
  });

  m.def("fuse", [](const std::vector<Matrix>& distributions, const std::string& rule) {
    std::vector<MemberPrediction> members;
    for (std::size_t i = 0; i < distributions.size(); ++i) {
      members.push_back({"m" + std::to_string(i), distributions[i]});
    }
    return fuse_predictions(members, parse_fusion_rule(rule));
  }, py::arg("distributions"), py::arg("rule") = "soft");

  m.def("_compute_metrics", [](const std::vector<std::vector<int>>& predictions,
                               const std::vector<std::vector<int>>& golds, int class_count) {
    return to_json(compute_metrics(predictions, golds, class_count)).dump();
  });

  m.def("_train_head", &train_head, py::arg("head"), py::arg("branch"), py::arg("train"),
        py::arg("out_dir"), py::arg("hidden_size"), py::arg("encoder_seed"), py::arg("epochs"),
        py::arg("batch_size"), py::arg("learning_rate"), py::arg("seed"),
        py::arg("lstm_units"), py::arg("dropout"));

  m.def("write_ensemble", [](const std::string& branch,
                             const std::vector<std::pair<std::string, std::string>>& members,
                             const std::string& manifest, const std::string& fusion) {
    EnsembleConfig cfg;
    cfg.branch = parse_branch(branch);
    cfg.fusion = parse_fusion_rule(fusion);
    for (const auto& [id, path] : members) cfg.members.push_back({id, path});
    (void)LoadedEnsemble::load(cfg);
    cfg.save(manifest);
  }, py::arg("branch"), py::arg("members"), py::arg("manifest"), py::arg("fusion") = "soft");

  py::class_<Analyzer>(m, "_Analyzer")
      .def(py::init([](const std::string& ate, const std::string& atsa) {
        return Analyzer::load(EnsembleConfig::load(ate), EnsembleConfig::load(atsa));
      }))
      .def("analyze", [](const Analyzer& a, const std::string& text) {
        Analysis result;
        {
          py::gil_scoped_release release;
          result = a.analyze(text);
        }
        return analysis_to_json(result).dump();
      });

  py::class_<AnalysisService, std::shared_ptr<AnalysisService>>(m, "_Service")
      .def(py::init([](std::optional<std::string> ate, std::optional<std::string> atsa,
                       std::size_t max_upload) {
        ServiceConfig cfg;
        cfg.ate_manifest = std::move(ate);
        cfg.atsa_manifest = std::move(atsa);
        cfg.max_upload_bytes = max_upload;
        return AnalysisService::from_config(cfg);
      }), py::arg("ate") = std::nullopt, py::arg("atsa") = std::nullopt,
           py::arg("max_upload_bytes") = std::size_t{1} << 20)
      .def("handle_analyze", [](const AnalysisService& s, const std::string& body) {
        const HttpResult r = s.handle_analyze(body);
        return std::make_pair(r.status, r.body);
      })
      .def("check_upload", [](const AnalysisService& s, const std::string& upload) {
        const auto r = s.check_upload(upload);
        return r ? std::optional<std::pair<int, std::string>>({r->status, r->body}) : std::nullopt;
      })
      .def("analyze_file", &AnalysisService::analyze_file)
      .def_property_readonly("ready", &AnalysisService::ready);
}
