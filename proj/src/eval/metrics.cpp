#include "lcgan/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lcgan/data/ingest.hpp"

namespace lcgan::eval {

using nlohmann::json;

json to_json(const EvalReport& r) {
  json j{{"per_class_accuracy", r.per_class_accuracy},
         {"class_totals", r.class_totals},
         {"overall_accuracy", r.overall_accuracy},
         {"macro_accuracy", r.macro_accuracy},
         {"confusion", r.confusion},
         {"metadata", r.metadata}};
  j["label_preservation_rate"] = r.label_preservation_rate ? json(*r.label_preservation_rate) : json(nullptr);
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    r.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
    r.class_totals = j.at("class_totals").get<std::vector<std::size_t>>();
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.macro_accuracy = j.at("macro_accuracy").get<double>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    if (j.contains("label_preservation_rate") && !j["label_preservation_rate"].is_null())
      r.label_preservation_rate = j["label_preservation_rate"].get<double>();
    r.metadata = j.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

EvalReport evaluate_predictions(const std::vector<int>& labels, const std::vector<int>& predictions, int classes) {
  if (labels.size() != predictions.size()) throw ShapeError("label and prediction counts differ");
  if (labels.empty()) throw InvalidArgument("cannot evaluate on an empty test set");
  if (classes < 1) throw InvalidArgument("class count must be positive");
  EvalReport r;
  const auto k = static_cast<std::size_t>(classes);
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  r.class_totals.assign(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= classes || p < 0 || p >= classes) throw InvalidArgument("class index outside [0, K)");
    ++r.confusion[y][p];
    ++r.class_totals[y];
    correct += y == p;
  }
  r.per_class_accuracy.assign(k, 0.0);
  double macro = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (r.class_totals[c] == 0) continue;
    r.per_class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(r.class_totals[c]);
    macro += r.per_class_accuracy[c];
    ++present;
  }
  r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  r.macro_accuracy = macro / present;
  return r;
}

std::vector<int> predict(const models::Classifier<float>& f, const data::Corpus& corpus, std::size_t batch) {
  if (f.arch().image != corpus.shape()) throw ShapeError("classifier and corpus image shapes differ");
  std::vector<int> out;
  out.reserve(corpus.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < corpus.size(); start += batch) {
    const std::size_t end = std::min(corpus.size(), start + batch);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto pred = models::argmax_rows(f.forward(corpus.gather(idx), nullptr));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

EvalReport evaluate_classifier(const models::Classifier<float>& f, const data::Corpus& test) {
  if (test.empty()) throw InvalidArgument("cannot evaluate on an empty test set");
  if (f.classes() != test.class_count())
    throw InvalidArgument("classifier has " + std::to_string(f.classes()) + " classes, test set has " +
                          std::to_string(test.class_count()));
  return evaluate_predictions(test.labels(), predict(f, test), test.class_count());
}

namespace {

Preservation tally_agreement(const std::vector<int>& labels, const std::vector<int>& pred, int classes) {
  const auto k = static_cast<std::size_t>(classes);
  Preservation p;
  p.per_class.assign(k, 0.0);
  p.class_totals.assign(k, 0);
  std::vector<std::size_t> hits(k, 0);
  std::size_t total_hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++p.class_totals[labels[i]];
    hits[labels[i]] += pred[i] == labels[i];
    total_hits += pred[i] == labels[i];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (p.class_totals[c]) p.per_class[c] = static_cast<double>(hits[c]) / static_cast<double>(p.class_totals[c]);
  p.overall = static_cast<double>(total_hits) / static_cast<double>(labels.size());
  return p;
}

}  // namespace

Preservation label_preservation(const models::Classifier<float>& f, const models::Generator<float>& g,
                                const data::Corpus& corpus, std::size_t batch) {
  if (corpus.empty()) throw InvalidArgument("label preservation needs a non-empty corpus");
  const bool to_real = g.arch().direction == models::Direction::s2r;
  if ((f.arch().side == models::DomainSide::real_side) != to_real)
    throw InvalidArgument("classifier domain does not match the generator's output domain (" +
                          models::to_string(f.arch().side) + " vs " + models::to_string(g.arch().direction) + ")");
  if (f.classes() != corpus.class_count()) throw InvalidArgument("classifier and corpus class counts differ");

  std::vector<int> pred;
  pred.reserve(corpus.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < corpus.size(); start += batch) {
    const std::size_t end = std::min(corpus.size(), start + batch);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto labels = corpus.gather_labels(idx);
    const auto out = g.forward(corpus.gather(idx), g.conditional() ? std::span<const int>(labels) : std::span<const int>{},
                               nullptr);
    const auto p = models::argmax_rows(f.forward(out, nullptr));
    pred.insert(pred.end(), p.begin(), p.end());
  }
  return tally_agreement(corpus.labels(), pred, corpus.class_count());
}

double label_preservation_rate(const models::Classifier<float>& f, const models::Generator<float>& g,
                               const data::Corpus& corpus) {
  return label_preservation(f, g, corpus).overall;
}

void render_image_grid(const std::vector<std::vector<std::vector<float>>>& rows, ImageShape tile,
                       const std::vector<std::string>& captions, const std::filesystem::path& path, int pad) {
  if (rows.empty() || rows.front().empty()) throw InvalidArgument("image grid needs at least one tile");
  if (pad < 0) throw InvalidArgument("padding must be non-negative");
  if (tile.c != 1 && tile.c != 3) throw ShapeError("grid tiles must have 1 or 3 channels");
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("image grid rows have different lengths");
    for (const auto& img : r)
      if (img.size() != tile.size()) throw ShapeError("grid tile does not match the declared tile shape");
  }
  data::PngImage png;
  png.height = static_cast<int>(rows.size()) * tile.h + (static_cast<int>(rows.size()) + 1) * pad;
  png.width = static_cast<int>(cols) * tile.w + (static_cast<int>(cols) + 1) * pad;
  png.channels = tile.c;
  png.bytes.assign(static_cast<std::size_t>(png.width) * png.height * png.channels, 255);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& img = rows[r][c];
      const int y0 = pad + static_cast<int>(r) * (tile.h + pad);
      const int x0 = pad + static_cast<int>(c) * (tile.w + pad);
      for (int y = 0; y < tile.h; ++y)
        for (int x = 0; x < tile.w; ++x)
          for (int ch = 0; ch < tile.c; ++ch) {
            const float v = img[(static_cast<std::size_t>(y) * tile.w + x) * tile.c + ch];
            const double scaled = std::clamp((static_cast<double>(v) + 1.0) * 127.5, 0.0, 255.0);
            png.bytes[(static_cast<std::size_t>(y0 + y) * png.width + (x0 + x)) * tile.c + ch] =
                static_cast<std::uint8_t>(std::lround(scaled));
          }
    }
  }
  std::vector<std::pair<std::string, std::string>> text;
  for (std::size_t i = 0; i < captions.size(); ++i) text.emplace_back("Caption" + std::to_string(i), captions[i]);
  data::write_png(path, png, text);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "method,reduction_rate,class,accuracy,seed\n";
  out.precision(10);
  for (const auto& r : rows) {
    if (r.method.find_first_of(",\n\"") != std::string::npos)
      throw InvalidArgument("method name '" + r.method + "' cannot be written unquoted");
    out << r.method << ',' << r.reduction_rate << ',' << r.cls << ',' << r.accuracy << ',' << r.seed << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "method,reduction_rate,class,accuracy,seed")
    throw FormatError(path.string() + ": unexpected CSV header");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 5) throw FormatError(path.string() + ": expected 5 columns in '" + line + "'");
    try {
      rows.push_back({cells[0], std::stod(cells[1]), std::stoi(cells[2]), std::stod(cells[3]), std::stoull(cells[4])});
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad number in '" + line + "'");
    }
  }
  return rows;
}

}  // namespace lcgan::eval
