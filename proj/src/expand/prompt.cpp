#include "dpr/expand/prompt.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpr/error.hpp"

namespace dpr {

void PromptTemplate::validate() const {
  if (instruction.empty()) throw DataError("prompt template: empty instruction");
  if (kind == Kind::few_shot && exemplars.empty())
    throw DataError("prompt template: few-shot template needs at least one exemplar");
}

PromptTemplate PromptTemplate::zero_shot_default() {
  PromptTemplate t;
  t.kind = Kind::zero_shot;
  t.instruction = "Generate {n} search queries that the following passage answers. "
                  "Write one query per line.";
  return t;
}

PromptTemplate PromptTemplate::few_shot_default() {
  PromptTemplate t;
  t.kind = Kind::few_shot;
  t.instruction = "Write {n} search queries for the given passage, one per line, "
                  "following the examples.";
  t.exemplars.push_back(
      {"The Amazon river discharges more water than any other river on earth, "
       "draining a basin that covers roughly forty percent of South America.",
       {"which river has the largest discharge", "how big is the amazon river basin"}});
  t.exemplars.push_back(
      {"Photosynthesis converts carbon dioxide and water into glucose and oxygen "
       "using energy captured from sunlight by chlorophyll.",
       {"what does photosynthesis produce", "what is the role of chlorophyll"}});
  return t;
}

std::string render_prompt(const PromptTemplate& tpl, const Passage& passage, int n) {
  if (n < 1) throw ContractError("render_prompt: n must be >= 1");
  tpl.validate();

  std::string instruction = tpl.instruction;
  const std::string placeholder = "{n}";
  if (auto at = instruction.find(placeholder); at != std::string::npos)
    instruction.replace(at, placeholder.size(), std::to_string(n));

  std::ostringstream os;
  os << instruction << "\n\n";
  if (tpl.kind == PromptTemplate::Kind::few_shot) {
    for (const auto& ex : tpl.exemplars) {
      os << "Passage: " << ex.passage << "\n" << "Queries:\n";
      for (std::size_t i = 0; i < ex.queries.size(); ++i)
        os << (i + 1) << ". " << ex.queries[i] << "\n";
      os << "\n";
    }
  }
  os << "Passage: " << passage.text << "\n" << "Queries:\n";
  return os.str();
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("prompt template: cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("prompt template: " + path + ": " + e.what());
  }
  PromptTemplate t;
  const std::string kind = j.value("kind", "zero-shot");
  if (kind == "zero-shot")
    t.kind = Kind::zero_shot;
  else if (kind == "few-shot")
    t.kind = Kind::few_shot;
  else
    throw DataError("prompt template: unknown kind '" + kind + "'");
  t.instruction = j.value("instruction", "");
  if (j.contains("exemplars")) {
    for (const auto& ex : j["exemplars"]) {
      PromptExemplar e;
      e.passage = ex.at("passage").get<std::string>();
      e.queries = ex.at("queries").get<std::vector<std::string>>();
      t.exemplars.push_back(std::move(e));
    }
  }
  t.validate();
  return t;
}

void PromptTemplate::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("prompt template: cannot write " + path);
  nlohmann::ordered_json j;
  j["kind"] = kind == Kind::zero_shot ? "zero-shot" : "few-shot";
  j["instruction"] = instruction;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& ex : exemplars) {
    nlohmann::ordered_json e;
    e["passage"] = ex.passage;
    e["queries"] = ex.queries;
    arr.push_back(e);
  }
  j["exemplars"] = arr;
  out << j.dump(2) << "\n";
}

}  // namespace dpr
