#include "evidencedesk/api.hpp"
#include "evidencedesk/dataset.hpp"
#include "evidencedesk/evalstats.hpp"
#include "evidencedesk/pipeline.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace ed = evidencedesk;

namespace {

py::dict stat_result(const ed::stats::StatTestResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["df"] = r.df;
  d["p_value"] = r.p_value;
  return d;
}

// Runs one question against an on-disk store and index with a scripted
// transcript; returns the response document as JSON text.
std::string ask_json(const std::string& store, const std::string& index,
                     const std::string& transcript, const std::string& question,
                     const std::string& config_json) {
  auto kb = ed::pipeline::KnowledgeBase::open(store, index);
  const auto cfg = ed::api::apply_overrides({}, nlohmann::json::parse(config_json));
  ed::llm::ScriptedChatClient client(ed::llm::load_transcript(transcript, false));
  const auto result = ed::pipeline::answer_question(question, {}, kb, cfg, client);
  nlohmann::json out;
  if (result.refusal) {
    out = {{"status", "refused"}, {"refusal", ed::pipeline::to_json(*result.refusal)}};
  } else {
    out = {{"status", "done"}, {"response", ed::pipeline::to_json(*result.answer)}};
  }
  out["stages"] = result.trace.stage_records.size();
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_evidencedesk, m) {
  py::register_exception<ed::Error>(m, "EvidenceDeskError", PyExc_ValueError);

  m.def(
      "binomial_test",
      [](int k, int n, double p0, const std::string& alternative) {
        return ed::stats::binomial_test(k, n, p0, ed::stats::parse_alternative(alternative));
      },
      py::arg("k"), py::arg("n"), py::arg("p0") = 0.5, py::arg("alternative") = "greater");
  m.def("bh_adjust", [](const std::vector<double>& p) { return ed::stats::bh_adjust(p); });
  m.def("kruskal_wallis", [](const std::vector<std::vector<double>>& g) {
    return stat_result(ed::stats::kruskal_wallis(g));
  });
  m.def("friedman", [](const std::vector<std::vector<double>>& b) {
    return stat_result(ed::stats::friedman(b));
  });
  m.def("spearman_brown", &ed::stats::spearman_brown);
  m.def("validate_format", [](const std::string& text) {
    const auto r = ed::pipeline::validate_format(text);
    py::dict d;
    d["passed"] = r.pass();
    d["violations"] = r.violations;
    d["grade"] = r.grade ? py::object(py::str(std::string(ed::grade::to_string(*r.grade))))
                         : py::object(py::none());
    return d;
  });
  m.def("benchmark_counts", [](const std::string& path) {
    const auto set = ed::dataset::load_benchmark(path);
    return std::make_pair(set.total(), set.counts_by_specialty);
  });
  m.def("ask_json", &ask_json, py::arg("store"), py::arg("index"), py::arg("transcript"),
        py::arg("question"), py::arg("config_json") = "{}");
}
