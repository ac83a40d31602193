#include "catalog/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "catalog/comprehension.hpp"
#include "catalog/io.hpp"

namespace catalog {

namespace fs = std::filesystem;

void to_json(json& j, const AnnotationEntry& e) {
  j = json{{"catalog_figure_name", e.catalog_figure_name},
           {"crop_path", e.crop_path},
           {"excavation_unit", e.excavation_unit},
           {"morphological_class", e.morphological_class},
           {"bbox", e.bbox},
           {"page_id", e.page_id},
           {"match_stage", to_string(e.match_stage)}};
  if (e.confidence) j["confidence"] = *e.confidence;
}

void from_json(const json& j, AnnotationEntry& e) {
  e.catalog_figure_name = j.value("catalog_figure_name", std::string{});
  e.crop_path = j.value("crop_path", std::string{});
  e.excavation_unit = j.value("excavation_unit", std::string{});
  e.morphological_class = j.value("morphological_class", std::string{});
  e.bbox = j.at("bbox").get<BoundingBox>();
  e.page_id = j.at("page_id").get<std::string>();
  e.match_stage = parse_match_stage(j.value("match_stage", std::string("foreign_key")));
  if (j.contains("confidence") && !j.at("confidence").is_null()) {
    e.confidence = j.at("confidence").get<double>();
  } else {
    e.confidence.reset();
  }
}

std::string to_jsonl(std::span<const AnnotationEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += json(e).dump(-1, ' ', false);
    out += '\n';
  }
  return out;
}

std::vector<AnnotationEntry> read_jsonl(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<AnnotationEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<AnnotationEntry>());
    } catch (const std::exception& e) {
      throw DecodeError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

EmitResult emit_annotations(std::span<const MatchPair> matches, std::span<const AttributeRecord> text_records,
                            const BlockLayout& layout, const fs::path& crops_src, const fs::path& out_dir,
                            const AnnotationFields& fields) {
  std::map<std::string, const AttributeRecord*> texts;
  for (const auto& r : text_records) texts.emplace(r.block_id, &r);

  struct Row {
    std::string page_id;
    std::string image_id;
    AnnotationEntry entry;
  };
  std::vector<Row> rows;
  EmitResult result;
  const fs::path crops_out = out_dir / "crops";
  std::error_code ec;
  fs::create_directories(crops_out, ec);
  if (ec) throw IoError("cannot create " + crops_out.string() + ": " + ec.message());
  const bool copy_crops = fs::weakly_canonical(crops_src) != fs::weakly_canonical(crops_out);

  for (const auto& pair : matches) {
    const Block& image = layout.block(pair.image_block_id);
    const std::string name = crop_file_name(image);
    const fs::path src = crops_src / name;
    if (!fs::is_regular_file(src)) throw IoError("missing crop for block " + image.id + ": " + src.string());
    if (copy_crops) {
      fs::copy_file(src, crops_out / name, fs::copy_options::overwrite_existing, ec);
      if (ec) throw IoError("cannot copy crop for block " + image.id + ": " + ec.message());
    }

    AnnotationEntry entry;
    entry.crop_path = (fs::path("crops") / name).generic_string();
    entry.bbox = image.box;
    entry.page_id = image.page_id;
    entry.match_stage = pair.stage;
    entry.confidence = image.confidence;

    auto it = texts.find(pair.text_block_id);
    const AttributeRecord* text = it == texts.end() ? nullptr : it->second;
    auto field = [&](const std::string& key, std::string& dest) {
      const std::string* v = text ? text->attributes.find(key) : nullptr;
      if (v && !v->empty()) {
        dest = *v;
      } else {
        result.warnings.push_back("pair " + pair.image_block_id + "/" + pair.text_block_id + ": missing '" + key +
                                  "'");
      }
    };
    field(fields.figure_key, entry.catalog_figure_name);
    field(fields.unit_key, entry.excavation_unit);
    field(fields.class_key, entry.morphological_class);
    rows.push_back({image.page_id, image.id, std::move(entry)});
  }

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.page_id, a.image_id) < std::tie(b.page_id, b.image_id);
  });
  for (auto& r : rows) result.entries.push_back(std::move(r.entry));
  write_file_atomic(out_dir / "annotations.jsonl", to_jsonl(result.entries));
  return result;
}

namespace {

Histogram sorted_histogram(const std::map<std::string, std::size_t>& counts) {
  Histogram h(counts.begin(), counts.end());
  std::stable_sort(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return h;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

DatasetStats compute_stats(std::span<const AnnotationEntry> entries) {
  std::map<std::string, std::size_t> classes, units;
  for (const auto& e : entries) {
    ++classes[e.morphological_class];
    ++units[e.excavation_unit];
  }
  DatasetStats s;
  s.class_histogram = sorted_histogram(classes);
  s.unit_histogram = sorted_histogram(units);
  s.total_pairs = entries.size();
  s.n_classes = classes.size();
  s.n_units = units.size();
  return s;
}

void to_json(json& j, const DatasetStats& s) {
  auto hist = [](const Histogram& h) {
    json o = json::object();
    for (const auto& [k, v] : h) o[k] = v;
    return o;
  };
  j = json{{"total_pairs", s.total_pairs},
           {"n_classes", s.n_classes},
           {"n_units", s.n_units},
           {"class_histogram", hist(s.class_histogram)},
           {"unit_histogram", hist(s.unit_histogram)}};
}

std::string render_bar_chart_svg(const std::string& title, const Histogram& histogram) {
  constexpr double kLabelWidth = 160.0, kBarArea = 480.0, kRowHeight = 22.0, kTop = 40.0;
  const double height = kTop + kRowHeight * double(histogram.size()) + 20.0;
  std::size_t max_count = 0;
  for (const auto& [k, v] : histogram) max_count = std::max(max_count, v);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kLabelWidth + kBarArea + 60.0)
      << "\" height=\"" << fmt(height) << "\">\n"
      << "  <title>" << xml_escape(title) << "</title>\n"
      << "  <text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title) << "</text>\n";
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    const auto& [label, count] = histogram[i];
    const double y = kTop + kRowHeight * double(i);
    const double w = max_count == 0 ? 0.0 : kBarArea * double(count) / double(max_count);
    svg << "  <g class=\"bar\">\n"
        << "    <text x=\"" << fmt(kLabelWidth - 6.0) << "\" y=\"" << fmt(y + 15.0)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << xml_escape(label.empty() ? "(empty)" : label) << "</text>\n"
        << "    <rect x=\"" << fmt(kLabelWidth) << "\" y=\"" << fmt(y + 3.0) << "\" width=\"" << fmt(w)
        << "\" height=\"" << fmt(kRowHeight - 6.0) << "\" fill=\"#4c72b0\"/>\n"
        << "    <text x=\"" << fmt(kLabelWidth + w + 4.0) << "\" y=\"" << fmt(y + 15.0)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << count << "</text>\n"
        << "  </g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<fs::path> render_stats_plots(const DatasetStats& stats, const fs::path& out_dir) {
  const std::vector<fs::path> paths{out_dir / "class_dist.svg", out_dir / "unit_dist.svg"};
  write_file_atomic(paths[0], render_bar_chart_svg("Samples per morphological class", stats.class_histogram));
  write_file_atomic(paths[1], render_bar_chart_svg("Artifacts per excavation unit", stats.unit_histogram));
  return paths;
}

}  // namespace catalog
