#include "confrag/eval.hpp"

#include "confrag/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace confrag {
namespace {

using json = nlohmann::json;

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::string strip_commas(std::string text) {
  text.erase(std::remove(text.begin(), text.end(), ','), text.end());
  return text;
}

bool is_digit(char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; }

// Last number literal in `text` ("-1,234.5" style), commas kept.
std::optional<std::string> last_number(std::string_view text) {
  std::optional<std::string> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    if (begin > 0 && text[begin - 1] == '-' && (begin < 2 || !is_digit(text[begin - 2]))) {
      --begin;
    }
    while (i < text.size() &&
           (is_digit(text[i]) || (text[i] == ',' && i + 1 < text.size() && is_digit(text[i + 1])))) {
      ++i;
    }
    if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
      ++i;
      while (i < text.size() && is_digit(text[i])) {
        ++i;
      }
    }
    found = std::string(text.substr(begin, i - begin));
  }
  return found;
}

// Lenient numeric parse used only for grading: allows a leading '$' and a
// trailing '.' or '%'.
std::optional<double> parse_number(std::string_view text) {
  auto s = strip_commas(trim(text));
  if (!s.empty() && s.front() == '$') {
    s.erase(s.begin());
  }
  while (!s.empty() && (s.back() == '.' || s.back() == '%')) {
    s.pop_back();
  }
  if (s.empty()) {
    return std::nullopt;
  }
  double value = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string gold_value(std::string_view gold) {
  const auto marker = gold.rfind("####");
  if (marker != std::string_view::npos) {
    return strip_commas(trim(gold.substr(marker + 4)));
  }
  return trim(gold);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (const double v : values) {
    sum += v;
  }
  return sum / static_cast<double>(values.size());
}

int kind_rank(PipelineKind kind) { return static_cast<int>(kind); }

int metric_rank(const std::optional<MetricName>& metric) {
  if (!metric) {
    return -1;
  }
  return static_cast<int>(std::find(kAllMetrics.begin(), kAllMetrics.end(), *metric) -
                          kAllMetrics.begin());
}

bool cell_less(const AccuracyCell& a, const AccuracyCell& b) {
  if (a.kind != b.kind) {
    return kind_rank(a.kind) < kind_rank(b.kind);
  }
  if (a.models.size() != b.models.size()) {
    return a.models.size() < b.models.size();
  }
  if (a.models != b.models) {
    return a.models < b.models;
  }
  return metric_rank(a.metric) < metric_rank(b.metric);
}

}  // namespace

std::vector<QAItem> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read gold file '" + path.string() + "'");
  }
  std::vector<QAItem> items;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const auto where = path.string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(where + ": malformed JSON (" + e.what() + ")");
    }
    QAItem item;
    try {
      item.question = obj.at("question").get<std::string>();
      const auto& answer = obj.at("answer");
      item.answer = answer.is_string() ? answer.get<std::string>() : answer.dump();
      item.id = obj.contains("id") ? (obj["id"].is_string() ? obj["id"].get<std::string>()
                                                            : obj["id"].dump())
                                   : "q-" + std::to_string(items.size());
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
    if (trim(item.answer).empty()) {
      throw InputError(where + ": empty gold answer");
    }
    if (!seen.insert(item.id).second) {
      throw InputError(where + ": duplicate question id '" + item.id + "'");
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::optional<std::string> extract_answer(std::string_view completion) {
  const auto marker = completion.rfind("####");
  if (marker != std::string_view::npos) {
    auto value = strip_commas(trim(completion.substr(marker + 4)));
    if (!value.empty()) {
      return value;
    }
  }
  if (auto number = last_number(completion)) {
    return strip_commas(*number);
  }
  return std::nullopt;
}

bool is_correct(const std::optional<std::string>& extracted, std::string_view gold) {
  if (!extracted) {
    return false;
  }
  const auto expected = gold_value(gold);
  const auto a = parse_number(*extracted);
  const auto b = parse_number(expected);
  if (a && b) {
    const double scale = std::max(std::abs(*a), std::abs(*b));
    return std::abs(*a - *b) <= 1e-6 * scale;
  }
  return trim(*extracted) == expected;
}

// ---------------------------------------------------------------------------
// Aggregation

const AccuracyCell* AccuracyReport::find(PipelineKind kind, std::span<const std::size_t> models,
                                         std::optional<MetricName> metric) const {
  for (const auto& cell : cells) {
    if (cell.kind == kind && cell.metric == metric &&
        std::equal(cell.models.begin(), cell.models.end(), models.begin(), models.end())) {
      return &cell;
    }
  }
  return nullptr;
}

void AccuracyReport::summarize() {
  vanilla_llm.reset();
  vanilla_rag.assign(embedding_models.size(), std::nullopt);
  vanilla_rag_avg.reset();
  rag_vs_llm.reset();
  mixture_by_size.clear();
  mixture_avg.reset();
  mixture_vs_llm.reset();
  mixture_vs_rag.reset();
  confident_by_size.clear();
  confident_avg.clear();
  confident_vs_rag.clear();
  confident_vs_llm.clear();

  std::vector<double> rag;
  std::map<std::size_t, std::vector<double>> mixture_sizes;
  std::vector<double> mixture_all;
  std::map<MetricName, std::map<std::size_t, std::vector<double>>> confident_sizes;
  std::map<MetricName, std::vector<double>> confident_all;

  for (const auto& cell : cells) {
    switch (cell.kind) {
      case PipelineKind::llm:
        vanilla_llm = cell.accuracy;
        break;
      case PipelineKind::vanilla:
        if (cell.models.size() == 1 && cell.models.front() < vanilla_rag.size()) {
          vanilla_rag[cell.models.front()] = cell.accuracy;
          rag.push_back(cell.accuracy);
        }
        break;
      case PipelineKind::mixture:
        mixture_sizes[cell.models.size()].push_back(cell.accuracy);
        mixture_all.push_back(cell.accuracy);
        break;
      case PipelineKind::confident:
        if (cell.metric) {
          confident_sizes[*cell.metric][cell.models.size()].push_back(cell.accuracy);
          confident_all[*cell.metric].push_back(cell.accuracy);
        }
        break;
    }
  }

  if (!rag.empty()) {
    vanilla_rag_avg = mean(rag);
    if (vanilla_llm) {
      rag_vs_llm = *vanilla_rag_avg - *vanilla_llm;
    }
  }
  for (const auto& [size, values] : mixture_sizes) {
    mixture_by_size[size] = mean(values);
  }
  if (!mixture_all.empty()) {
    mixture_avg = mean(mixture_all);
    if (vanilla_llm) {
      mixture_vs_llm = *mixture_avg - *vanilla_llm;
    }
    if (vanilla_rag_avg) {
      mixture_vs_rag = *mixture_avg - *vanilla_rag_avg;
    }
  }
  for (const auto& [metric, sizes] : confident_sizes) {
    for (const auto& [size, values] : sizes) {
      confident_by_size[metric][size] = mean(values);
    }
  }
  for (const auto& [metric, values] : confident_all) {
    const double avg = mean(values);
    confident_avg[metric] = avg;
    if (vanilla_rag_avg) {
      confident_vs_rag[metric] = avg - *vanilla_rag_avg;
    }
    if (vanilla_llm) {
      confident_vs_llm[metric] = avg - *vanilla_llm;
    }
  }
}

AccuracyReport aggregate(std::span<const QuestionResult> results,
                         const std::map<std::string, QAItem>& gold) {
  AccuracyReport report;
  std::map<std::tuple<int, std::vector<std::size_t>, int>, AccuracyCell> cells;
  for (const auto& result : results) {
    const auto item = gold.find(result.question_id);
    if (item == gold.end()) {
      throw InputError("no gold answer for question '" + result.question_id + "'");
    }
    std::optional<MetricName> metric;
    if (result.kind == PipelineKind::confident) {
      metric = result.metric;
    }
    const auto key = std::make_tuple(kind_rank(result.kind), result.models, metric_rank(metric));
    auto& cell = cells[key];
    cell.kind = result.kind;
    cell.models = result.models;
    cell.metric = metric;
    ++cell.total;
    if (!result.records.empty() && is_correct(extract_answer(result.final_answer), item->second.answer)) {
      ++cell.correct;
    }
  }
  for (auto& [key, cell] : cells) {
    cell.accuracy = static_cast<double>(cell.correct) / static_cast<double>(cell.total);
    report.cells.push_back(cell);
  }
  std::sort(report.cells.begin(), report.cells.end(), cell_less);
  report.summarize();
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json optional_number(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

json size_map(const std::map<std::size_t, double>& by_size) {
  json out = json::object();
  for (const auto& [size, value] : by_size) {
    out[std::to_string(size)] = value;
  }
  return out;
}

}  // namespace

json to_json(const AccuracyReport& report) {
  json doc;
  doc["llm"] = report.llm;
  doc["embedding_models"] = report.embedding_models;
  doc["manifest"] = report.manifest_file;
  doc["config_hash"] = report.config_hash;

  json cells = json::array();
  for (const auto& cell : report.cells) {
    json models = json::array();
    for (const auto m : cell.models) {
      models.push_back(m + 1);
    }
    cells.push_back({{"pipeline", std::string(to_string(cell.kind))},
                     {"models", models},
                     {"combination", combination_label(cell.models)},
                     {"metric", cell.metric ? json(std::string(to_string(*cell.metric))) : json(nullptr)},
                     {"correct", cell.correct},
                     {"total", cell.total},
                     {"accuracy", cell.accuracy}});
  }
  doc["cells"] = cells;

  json summary;
  summary["vanilla_llm"] = optional_number(report.vanilla_llm);
  json rag = json::array();
  for (const auto& value : report.vanilla_rag) {
    rag.push_back(optional_number(value));
  }
  summary["vanilla_rag"] = rag;
  summary["vanilla_rag_avg"] = optional_number(report.vanilla_rag_avg);
  summary["rag_vs_llm"] = optional_number(report.rag_vs_llm);
  summary["mixture"] = {{"by_size", size_map(report.mixture_by_size)},
                        {"avg", optional_number(report.mixture_avg)},
                        {"vs_llm", optional_number(report.mixture_vs_llm)},
                        {"vs_rag", optional_number(report.mixture_vs_rag)}};
  json confident = json::object();
  for (const auto& [metric, avg] : report.confident_avg) {
    const auto name = std::string(to_string(metric));
    const auto by_size = report.confident_by_size.find(metric);
    const auto vs_rag = report.confident_vs_rag.find(metric);
    const auto vs_llm = report.confident_vs_llm.find(metric);
    confident[name] = {
        {"by_size", by_size == report.confident_by_size.end() ? json::object() : size_map(by_size->second)},
        {"avg", avg},
        {"vs_rag", vs_rag == report.confident_vs_rag.end() ? json(nullptr) : json(vs_rag->second)},
        {"vs_llm", vs_llm == report.confident_vs_llm.end() ? json(nullptr) : json(vs_llm->second)}};
  }
  summary["confident"] = confident;
  doc["summary"] = summary;

  json dropped = json::array();
  for (const auto& d : report.dropped) {
    dropped.push_back({{"question_id", d.question_id},
                       {"combination", d.combination},
                       {"model", d.model_index + 1},
                       {"error", d.error}});
  }
  doc["dropped"] = dropped;
  return doc;
}

AccuracyReport report_from_json(const json& doc) {
  AccuracyReport report;
  try {
    report.llm = doc.at("llm").get<std::string>();
    report.embedding_models = doc.at("embedding_models").get<std::vector<std::string>>();
    report.manifest_file = doc.value("manifest", std::string{});
    report.config_hash = doc.value("config_hash", std::string{});
    for (const auto& c : doc.at("cells")) {
      AccuracyCell cell;
      cell.kind = parse_pipeline(c.at("pipeline").get<std::string>());
      for (const auto& m : c.at("models")) {
        const auto index = m.get<std::size_t>();
        if (index == 0) {
          throw InputError("model numbers in report cells are 1-based");
        }
        cell.models.push_back(index - 1);
      }
      if (!c.at("metric").is_null()) {
        cell.metric = parse_metric(c["metric"].get<std::string>());
      }
      cell.correct = c.at("correct").get<std::size_t>();
      cell.total = c.at("total").get<std::size_t>();
      cell.accuracy = c.at("accuracy").get<double>();
      report.cells.push_back(std::move(cell));
    }
    if (doc.contains("dropped")) {
      for (const auto& d : doc["dropped"]) {
        report.dropped.push_back(DroppedEntry{.question_id = d.at("question_id").get<std::string>(),
                                              .combination = d.at("combination").get<std::string>(),
                                              .model_index = d.at("model").get<std::size_t>() - 1,
                                              .error = d.at("error").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
  report.summarize();
  return report;
}

// ---------------------------------------------------------------------------
// Text tables

namespace {

// Percentage points to one decimal, halves away from zero, never "-0.0".
double tenths_of_percent(double fraction) {
  const double points = std::round(fraction * 1000.0) / 10.0;
  return points == 0.0 ? 0.0 : points;
}

std::string percent(std::optional<double> value) {
  if (!value) {
    return "-";
  }
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.1f%%", tenths_of_percent(*value));
  return buffer;
}

std::string delta(std::optional<double> value) {
  if (!value) {
    return "-";
  }
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%+.1f%%", tenths_of_percent(*value));
  return buffer;
}

class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void rule() { rows_.emplace_back(); }

  std::string render() const {
    std::vector<std::size_t> widths;
    for (const auto& row : rows_) {
      widths.resize(std::max(widths.size(), row.size()), 0);
      for (std::size_t i = 0; i < row.size(); ++i) {
        widths[i] = std::max(widths[i], row[i].size());
      }
    }
    std::size_t total = 0;
    for (const auto w : widths) {
      total += w + 3;
    }
    std::string out;
    auto line = [&](const std::vector<std::string>& row) {
      std::string text;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::string cell = i < row.size() ? row[i] : std::string{};
        const auto pad = std::string(widths[i] - cell.size(), ' ');
        text += i == 0 ? cell + pad : pad + cell;
        if (i + 1 < widths.size()) {
          text += i == 0 ? " | " : "   ";
        }
      }
      while (!text.empty() && text.back() == ' ') {
        text.pop_back();
      }
      out += text + "\n";
    };
    line(rows_.front());
    out += std::string(total > 3 ? total - 3 : total, '-') + "\n";
    for (std::size_t r = 1; r < rows_.size(); ++r) {
      if (rows_[r].empty()) {
        out += std::string(total > 3 ? total - 3 : total, '-') + "\n";
      } else {
        line(rows_[r]);
      }
    }
    return out;
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string size_label(std::span<const std::size_t> sizes) {
  std::string label = "Avg (n=";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    label += (i > 0 ? "," : "") + std::to_string(sizes[i]);
  }
  return label + ")";
}

}  // namespace

std::string render_tables(const AccuracyReport& report) {
  std::ostringstream out;
  out << "LLM: " << report.llm << "\n";
  out << "Embedding models:";
  for (std::size_t i = 0; i < report.embedding_models.size(); ++i) {
    out << " [" << i + 1 << "] " << report.embedding_models[i];
  }
  out << "\n\n";

  out << "Table 1. Vanilla LLM vs vanilla RAG\n";
  {
    std::vector<std::string> header{"LLM", "Vanilla LLM"};
    for (std::size_t i = 0; i < report.embedding_models.size(); ++i) {
      header.push_back("Emb" + std::to_string(i + 1));
    }
    header.push_back("Avg");
    header.push_back("Improvement");
    TextTable table(header);
    std::vector<std::string> row{report.llm, percent(report.vanilla_llm)};
    for (const auto& value : report.vanilla_rag) {
      row.push_back(percent(value));
    }
    row.push_back(percent(report.vanilla_rag_avg));
    row.push_back(delta(report.rag_vs_llm));
    table.add(row);
    out << table.render() << "\n";
  }

  out << "Table 2. Mixture-embedding RAG\n";
  {
    std::vector<std::string> header{"LLM"};
    std::vector<std::string> row{report.llm};
    for (const auto& [size, value] : report.mixture_by_size) {
      header.push_back(std::to_string(size) + " Embs");
      row.push_back(percent(value));
    }
    for (const char* name : {"Avg", "vs Vanilla LLM", "vs Vanilla RAG"}) {
      header.emplace_back(name);
    }
    row.push_back(percent(report.mixture_avg));
    row.push_back(delta(report.mixture_vs_llm));
    row.push_back(delta(report.mixture_vs_rag));
    TextTable table(header);
    table.add(row);
    out << table.render() << "\n";
  }

  out << "Table 3. Confident RAG by embedding combination and confidence metric\n";
  {
    std::vector<std::string> header{"Emb. Model"};
    for (const auto metric : kAllMetrics) {
      header.emplace_back(to_string(metric));
    }
    TextTable table(header);

    std::map<std::size_t, std::vector<const AccuracyCell*>> by_size;
    std::vector<std::vector<std::size_t>> combos;
    for (const auto& cell : report.cells) {
      if (cell.kind == PipelineKind::confident &&
          std::find(combos.begin(), combos.end(), cell.models) == combos.end()) {
        combos.push_back(cell.models);
      }
    }
    std::vector<std::size_t> sizes;
    for (const auto& combo : combos) {
      if (std::find(sizes.begin(), sizes.end(), combo.size()) == sizes.end()) {
        sizes.push_back(combo.size());
      }
    }
    for (const auto size : sizes) {
      std::size_t rows_in_size = 0;
      for (const auto& combo : combos) {
        if (combo.size() != size) {
          continue;
        }
        ++rows_in_size;
        std::vector<std::string> row{combination_label(combo)};
        for (const auto metric : kAllMetrics) {
          const auto* cell = report.find(PipelineKind::confident, combo, metric);
          row.push_back(cell ? percent(cell->accuracy) : "-");
        }
        table.add(row);
      }
      if (rows_in_size > 1) {
        std::vector<std::string> row{size_label(std::vector<std::size_t>{size})};
        for (const auto metric : kAllMetrics) {
          std::optional<double> value;
          if (const auto it = report.confident_by_size.find(metric); it != report.confident_by_size.end()) {
            if (const auto v = it->second.find(size); v != it->second.end()) {
              value = v->second;
            }
          }
          row.push_back(percent(value));
        }
        table.add(row);
      }
      table.rule();
    }
    auto summary_row = [&](std::string label, const std::map<MetricName, double>& values, bool is_delta) {
      std::vector<std::string> row{std::move(label)};
      for (const auto metric : kAllMetrics) {
        const auto it = values.find(metric);
        if (it == values.end()) {
          row.push_back("-");
        } else {
          row.push_back(is_delta ? delta(it->second) : percent(it->second));
        }
      }
      table.add(row);
    };
    summary_row(size_label(sizes), report.confident_avg, false);
    summary_row("vs Vanilla RAG", report.confident_vs_rag, true);
    summary_row("vs Vanilla LLM", report.confident_vs_llm, true);
    out << table.render();
  }

  if (!report.dropped.empty()) {
    out << "\nDropped generations: " << report.dropped.size() << "\n";
    for (const auto& d : report.dropped) {
      out << "  question " << d.question_id << ", model " << d.model_index + 1 << ": " << d.error
          << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// CDF

std::vector<CdfPoint> cdf_report(std::span<const ScoredOutcome> outcomes, double sigma_steps) {
  if (outcomes.empty()) {
    throw InputError("cdf_report: no records");
  }
  std::vector<double> scores;
  scores.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (!std::isfinite(o.oriented)) {
      throw InputError("cdf_report: non-finite score");
    }
    scores.push_back(o.oriented);
  }
  std::sort(scores.begin(), scores.end());

  std::vector<CdfPoint> points;
  const auto n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i + 1 < scores.size() && scores[i + 1] == scores[i]) {
      continue;
    }
    points.push_back(CdfPoint{.threshold = scores[i],
                              .raw_cdf = static_cast<double>(i + 1) / n,
                              .smoothed_cdf = 0.0});
  }

  const auto grid = points.size();
  if (!(sigma_steps > 0.0)) {
    for (auto& p : points) {
      p.smoothed_cdf = p.raw_cdf;
    }
    return points;
  }
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma_steps));
  std::vector<double> spread(grid, 0.0);
  for (std::size_t i = 0; i < grid; ++i) {
    const double mass = points[i].raw_cdf - (i > 0 ? points[i - 1].raw_cdf : 0.0);
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - radius);
    const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(grid) - 1,
                                             static_cast<std::ptrdiff_t>(i) + radius);
    double norm = 0.0;
    for (auto j = lo; j <= hi; ++j) {
      const double d = static_cast<double>(j - static_cast<std::ptrdiff_t>(i)) / sigma_steps;
      norm += std::exp(-0.5 * d * d);
    }
    for (auto j = lo; j <= hi; ++j) {
      const double d = static_cast<double>(j - static_cast<std::ptrdiff_t>(i)) / sigma_steps;
      spread[static_cast<std::size_t>(j)] += mass * std::exp(-0.5 * d * d) / norm;
    }
  }
  double running = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    running += spread[i];
    points[i].smoothed_cdf = std::min(running, 1.0);
  }
  return points;
}

std::vector<double> cumulative_accuracy(std::span<const ScoredOutcome> outcomes,
                                        std::span<const CdfPoint> points) {
  std::vector<ScoredOutcome> sorted(outcomes.begin(), outcomes.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.oriented < b.oriented; });
  std::vector<double> out;
  out.reserve(points.size());
  std::size_t seen = 0;
  std::size_t correct = 0;
  for (const auto& point : points) {
    while (seen < sorted.size() && sorted[seen].oriented <= point.threshold) {
      correct += sorted[seen].correct ? 1 : 0;
      ++seen;
    }
    out.push_back(seen == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(seen));
  }
  return out;
}

std::string format_cdf_csv(std::span<const CdfPoint> points) {
  std::string out = "threshold,raw_cdf,smoothed_cdf\n";
  for (const auto& p : points) {
    out += format_double(p.threshold) + "," + format_double(p.raw_cdf) + "," +
           format_double(p.smoothed_cdf) + "\n";
  }
  return out;
}

std::vector<CdfPoint> parse_cdf_csv(std::string_view text) {
  std::vector<CdfPoint> points;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != "threshold,raw_cdf,smoothed_cdf") {
    throw InputError("cdf csv: missing or wrong header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    std::array<double, 3> values{};
    std::size_t start = 0;
    for (std::size_t col = 0; col < 3; ++col) {
      const auto comma = line.find(',', start);
      if ((col < 2) != (comma != std::string::npos)) {
        throw InputError("cdf csv line " + std::to_string(line_no) + ": expected 3 columns");
      }
      const auto field = trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), values[col]);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw InputError("cdf csv line " + std::to_string(line_no) + ": bad number '" + field + "'");
      }
      start = comma + 1;
    }
    points.push_back(CdfPoint{values[0], values[1], values[2]});
  }
  return points;
}

}  // namespace confrag
