#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "topicflow/common.hpp"
#include "topicflow/llm.hpp"
#include "topicflow/parallel.hpp"

namespace topicflow {

// ---------------------------------------------------------------------------
// Domain types

struct Document {
  std::string doc_id;
  std::string text;
  std::string firm_id;
  int year = 0;
  std::optional<int> morale_rating;
  std::map<std::string, std::string> metadata;

  bool operator==(const Document&) const = default;
};

enum class LeaderType { top, non_top, unknown };
enum class Characteristic { behavior, attitude, ability, other };

inline std::string to_string(LeaderType t) {
  switch (t) {
    case LeaderType::top: return "top";
    case LeaderType::non_top: return "non_top";
    default: return "unknown";
  }
}

inline std::string to_string(Characteristic c) {
  switch (c) {
    case Characteristic::behavior: return "behavior";
    case Characteristic::attitude: return "attitude";
    case Characteristic::ability: return "ability";
    default: return "other";
  }
}

inline LeaderType parse_leader_type(const std::string& s) {
  if (s == "top") return LeaderType::top;
  if (s == "non_top") return LeaderType::non_top;
  if (s == "unknown") return LeaderType::unknown;
  throw DataError("invalid leader type '" + s + "'");
}

inline Characteristic parse_characteristic(const std::string& s) {
  if (s == "behavior") return Characteristic::behavior;
  if (s == "attitude") return Characteristic::attitude;
  if (s == "ability") return Characteristic::ability;
  if (s == "other") return Characteristic::other;
  throw DataError("invalid characteristic '" + s + "'");
}

struct PassageFlags {
  bool implicit_extraction = false;
  bool change_meaning = false;
  bool is_past = false;
  bool operator==(const PassageFlags&) const = default;
};

// A leader-related snippet.  firm_id/year/morale are inherited from the
// source document at extraction time.
struct LeaderPassage {
  std::string passage_id;
  std::string source_doc_id;
  std::string text;
  LeaderType leader_type = LeaderType::unknown;
  Characteristic characteristic = Characteristic::other;
  PassageFlags flags;
  std::string firm_id;
  int year = 0;
  std::optional<int> morale_rating;

  bool operator==(const LeaderPassage&) const = default;
};

struct SliceKey {
  LeaderType leader_type;
  Characteristic characteristic;
  auto operator<=>(const SliceKey&) const = default;
};

inline std::string to_string(const SliceKey& k) { return to_string(k.leader_type) + "_" + to_string(k.characteristic); }

inline SliceKey parse_slice_key(const std::string& s) {
  for (auto t : {LeaderType::top, LeaderType::non_top})
    for (auto c : {Characteristic::behavior, Characteristic::attitude, Characteristic::ability})
      if (to_string(SliceKey{t, c}) == s) return {t, c};
  throw ConfigError("unknown slice '" + s + "' (expected e.g. top_behavior, non_top_ability)");
}

// The six analysis slices, in reporting order.
inline std::array<SliceKey, 6> analysis_slices() {
  return {SliceKey{LeaderType::top, Characteristic::behavior}, {LeaderType::top, Characteristic::attitude},
          {LeaderType::top, Characteristic::ability},          {LeaderType::non_top, Characteristic::behavior},
          {LeaderType::non_top, Characteristic::attitude},     {LeaderType::non_top, Characteristic::ability}};
}

struct CorpusSlice {
  SliceKey key;
  std::vector<LeaderPassage> passages;
};

struct SlicedCorpus {
  std::map<SliceKey, CorpusSlice> slices;  // always exactly the six analysis slices
  std::size_t excluded = 0;                // unknown leader type or "other" characteristic
};

struct PanelRow {
  std::string firm_id;
  int year = 0;
  std::string industry;
  double roa = 0.0;  // net income / total assets
  double morale = 0.0;
  long long employees = 1;
};

// ---------------------------------------------------------------------------
// CSV

namespace csv {

// RFC 4180 style: quoted fields may contain commas, quotes ("") and newlines.
// Returns rows with their 1-based starting line numbers.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> parse(const std::string& text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1, row_line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.emplace_back(row_line, std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
      row_line = ++line;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", row_line);
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.emplace_back(row_line, std::move(row));
  }
  return rows;
}

inline std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

}  // namespace csv

namespace detail {

inline int parse_int(const std::string& raw, const std::string& field, std::size_t line) {
  const std::string s = trim(raw);
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ParseError("field '" + field + "' is not an integer: '" + s + "'", line);
  }
}

inline double parse_real(const std::string& raw, const std::string& field, std::size_t line) {
  const std::string s = trim(raw);
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("field '" + field + "' is not a number: '" + s + "'", line);
  }
}

inline void validate_document(const Document& d, std::size_t line) {
  if (d.doc_id.empty()) throw ParseError("missing field 'doc_id'", line);
  if (trim(d.text).empty()) throw ParseError("field 'text' is empty", line);
  if (d.morale_rating && (*d.morale_rating < 1 || *d.morale_rating > 5))
    throw ParseError("morale_rating out of range 1-5", line);
}

inline Document document_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("record is not a JSON object", line);
  for (const char* f : {"doc_id", "text", "firm_id", "year"})
    if (!j.contains(f) || j[f].is_null()) throw ParseError(std::string("missing field '") + f + "'", line);
  Document d;
  try {
    d.doc_id = j["doc_id"].is_string() ? j["doc_id"].get<std::string>() : j["doc_id"].dump();
    d.text = j["text"].get<std::string>();
    d.firm_id = j["firm_id"].is_string() ? j["firm_id"].get<std::string>() : j["firm_id"].dump();
    d.year = j["year"].get<int>();
    if (j.contains("morale_rating") && !j["morale_rating"].is_null()) d.morale_rating = j["morale_rating"].get<int>();
    if (j.contains("metadata") && j["metadata"].is_object())
      for (auto& [k, v] : j["metadata"].items()) d.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad field type: ") + e.what(), line);
  }
  validate_document(d, line);
  return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loading

enum class CorpusFormat { jsonl, csv };

inline json to_json(const Document& d) {
  json j{{"doc_id", d.doc_id}, {"text", d.text}, {"firm_id", d.firm_id}, {"year", d.year}};
  if (d.morale_rating) j["morale_rating"] = *d.morale_rating;
  if (!d.metadata.empty()) j["metadata"] = d.metadata;
  return j;
}

inline std::vector<Document> parse_corpus(const std::string& content, CorpusFormat format) {
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  auto add = [&](Document d, std::size_t line) {
    if (!ids.insert(d.doc_id).second) throw ParseError("duplicate doc_id '" + d.doc_id + "'", line);
    docs.push_back(std::move(d));
  };
  if (format == CorpusFormat::jsonl) {
    std::istringstream is(content);
    std::size_t line_no = 0;
    for (std::string line; std::getline(is, line);) {
      ++line_no;
      if (trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
      }
      add(detail::document_from_json(j, line_no), line_no);
    }
    return docs;
  }
  auto rows = csv::parse(content);
  if (rows.empty()) return docs;
  const auto& header = rows.front().second;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const char* f : {"doc_id", "text", "firm_id", "year"})
    if (!col.count(f)) throw ParseError(std::string("missing field '") + f + "' in header", rows.front().first);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, cells] = rows[r];
    if (cells.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " columns", line);
    Document d;
    d.doc_id = cells[col["doc_id"]];
    d.text = cells[col["text"]];
    d.firm_id = cells[col["firm_id"]];
    d.year = detail::parse_int(cells[col["year"]], "year", line);
    if (col.count("morale_rating") && !trim(cells[col["morale_rating"]]).empty())
      d.morale_rating = detail::parse_int(cells[col["morale_rating"]], "morale_rating", line);
    for (const auto& [name, idx] : col)
      if (name != "doc_id" && name != "text" && name != "firm_id" && name != "year" && name != "morale_rating")
        d.metadata[name] = cells[idx];
    detail::validate_document(d, line);
    add(std::move(d), line);
  }
  return docs;
}

inline std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw ConfigError("corpus file not found: " + path.string());
  return parse_corpus(read_file(path), format);
}

inline CorpusFormat corpus_format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

inline void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) out += to_json(d).dump() + "\n";
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Passage store (JSON Lines)

inline json to_json(const LeaderPassage& p) {
  json j{{"passage_id", p.passage_id},
         {"source_doc_id", p.source_doc_id},
         {"text", p.text},
         {"leader_type", to_string(p.leader_type)},
         {"characteristic", to_string(p.characteristic)},
         {"flags",
          {{"implicit_extraction", p.flags.implicit_extraction},
           {"change_meaning", p.flags.change_meaning},
           {"is_past", p.flags.is_past}}},
         {"firm_id", p.firm_id},
         {"year", p.year}};
  if (p.morale_rating) j["morale_rating"] = *p.morale_rating;
  return j;
}

inline LeaderPassage passage_from_json(const json& j) {
  LeaderPassage p;
  p.passage_id = j.at("passage_id").get<std::string>();
  p.source_doc_id = j.at("source_doc_id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.leader_type = parse_leader_type(j.at("leader_type").get<std::string>());
  p.characteristic = parse_characteristic(j.at("characteristic").get<std::string>());
  if (j.contains("flags")) {
    const auto& f = j["flags"];
    p.flags = {f.value("implicit_extraction", false), f.value("change_meaning", false), f.value("is_past", false)};
  }
  p.firm_id = j.value("firm_id", "");
  p.year = j.value("year", 0);
  if (j.contains("morale_rating") && !j["morale_rating"].is_null()) p.morale_rating = j["morale_rating"].get<int>();
  return p;
}

inline void save_passages(const std::filesystem::path& path, const std::vector<LeaderPassage>& passages) {
  std::string out;
  for (const auto& p : passages) out += to_json(p).dump() + "\n";
  write_file_atomic(path, out);
}

inline std::vector<LeaderPassage> load_passages(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("passage store not found: " + path.string());
  std::vector<LeaderPassage> out;
  std::istringstream is(read_file(path));
  std::size_t line_no = 0;
  std::unordered_set<std::string> ids;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto p = passage_from_json(json::parse(line));
      if (!ids.insert(p.passage_id).second) throw ParseError("duplicate passage_id '" + p.passage_id + "'", line_no);
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extraction

struct ExtractionSettings {
  std::string extraction_target = prompts::kExtractionTargetEn;
  std::string extraction_target_supplement = prompts::kExtractionSupplementEn;
  std::string classification_guideline = prompts::kClassificationGuidelineEn;
};

inline std::string document_metadata(const Document& d) {
  std::string meta = "firm: " + d.firm_id + "; year: " + std::to_string(d.year);
  for (const auto& [k, v] : d.metadata) meta += "; " + k + ": " + v;
  return meta + "; note: the reviewer is not necessarily a leader";
}

// Passage ids are "<doc_id>#<n>" in response order.
inline std::vector<LeaderPassage> extract_leader_passages(const Document& doc, LlmClient& client,
                                                          const ExtractionSettings& settings = {}) {
  LlmRequest req;
  req.template_id = TemplateId::extract;
  req.bindings = {{"input_text_metadata", document_metadata(doc)},
                  {"input_text", doc.text},
                  {"extraction_target", settings.extraction_target},
                  {"extraction_target_supplement", settings.extraction_target_supplement},
                  {"classification_guideline", settings.classification_guideline},
                  {"output_json_schema", prompts::kExtractionSchema}};
  req.prompt = prompt_template(req.template_id, client.language()).render(req.bindings);
  json out = client.complete(req, schemas::extraction());
  std::vector<LeaderPassage> passages;
  for (const auto& e : out["extractions"]) {
    LeaderPassage p;
    p.passage_id = doc.doc_id + "#" + std::to_string(passages.size());
    p.source_doc_id = doc.doc_id;
    p.text = e["text"].get<std::string>();
    try {
      p.leader_type = parse_leader_type(e["target_leader_layer"].get<std::string>());
      p.characteristic = parse_characteristic(e["element_type"].get<std::string>());
    } catch (const DataError& err) {
      throw SchemaViolation(err.what());
    }
    p.flags = {e.value("implicit_extraction", false), e.value("change_meaning", false), e.value("is_past", false)};
    p.firm_id = doc.firm_id;
    p.year = doc.year;
    p.morale_rating = doc.morale_rating;
    if (trim(p.text).empty()) continue;
    passages.push_back(std::move(p));
  }
  return passages;
}

// Runs extraction over all documents concurrently; output is in document order.
inline std::vector<LeaderPassage> extract_all(const std::vector<Document>& docs, LlmClient& client,
                                              const ExtractionSettings& settings = {}) {
  auto per_doc = parallel_map(docs.size(), client.options().max_in_flight,
                              [&](std::size_t i) { return extract_leader_passages(docs[i], client, settings); });
  std::vector<LeaderPassage> all;
  for (auto& v : per_doc)
    for (auto& p : v) all.push_back(std::move(p));
  return all;
}

inline SlicedCorpus slice_corpus(const std::vector<LeaderPassage>& passages) {
  SlicedCorpus out;
  for (auto key : analysis_slices()) out.slices[key] = CorpusSlice{key, {}};
  for (const auto& p : passages) {
    if (p.leader_type == LeaderType::unknown || p.characteristic == Characteristic::other) {
      ++out.excluded;
      continue;
    }
    out.slices[{p.leader_type, p.characteristic}].passages.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Panel

inline std::vector<PanelRow> parse_panel(const std::string& content) {
  auto rows = csv::parse(content);
  if (rows.empty()) throw DataError("panel file is empty");
  std::map<std::string, std::size_t> col;
  const auto& header = rows.front().second;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const char* f : {"firm_id", "year", "industry", "roa", "morale", "employees"})
    if (!col.count(f)) throw ConfigError(std::string("panel is missing column '") + f + "'");
  std::vector<PanelRow> out;
  std::set<std::pair<std::string, int>> keys;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, cells] = rows[r];
    if (cells.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " columns", line);
    PanelRow row;
    row.firm_id = cells[col["firm_id"]];
    row.year = detail::parse_int(cells[col["year"]], "year", line);
    row.industry = cells[col["industry"]];
    row.roa = detail::parse_real(cells[col["roa"]], "roa", line);
    row.morale = detail::parse_real(cells[col["morale"]], "morale", line);
    double emp = detail::parse_real(cells[col["employees"]], "employees", line);
    if (!(emp >= 1.0)) throw ParseError("non-positive employees for firm " + row.firm_id, line);
    row.employees = static_cast<long long>(emp);
    if (!keys.insert({row.firm_id, row.year}).second)
      throw ParseError("duplicate key (" + row.firm_id + ", " + std::to_string(row.year) + ")", line);
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<PanelRow> load_panel(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("panel file not found: " + path.string());
  return parse_panel(read_file(path));
}

inline void save_panel(const std::filesystem::path& path, const std::vector<PanelRow>& rows) {
  std::ostringstream os;
  os << "firm_id,year,industry,roa,morale,employees\n";
  os << std::setprecision(17);
  for (const auto& r : rows)
    os << csv::escape(r.firm_id) << "," << r.year << "," << csv::escape(r.industry) << "," << r.roa << "," << r.morale
       << "," << r.employees << "\n";
  write_file_atomic(path, os.str());
}

}  // namespace topicflow
