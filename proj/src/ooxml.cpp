// Copyright 2026 The Formula Scout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ZIP container via zlib, XML parts via Boost.PropertyTree.

#include <zlib.h>

#include <array>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "formula_scout/error.hpp"
#include "formula_scout/formula.hpp"
#include "formula_scout/workbook_io.hpp"

namespace formula_scout {
namespace {

using boost::property_tree::ptree;

// ---- ZIP ---------------------------------------------------------------

std::uint32_t le(std::string_view b, std::size_t off, int n) {
  if (off + static_cast<std::size_t>(n) > b.size()) throw ImportError("truncated archive");
  std::uint32_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + static_cast<std::size_t>(i)]);
  return v;
}

struct ZipEntry {
  std::uint16_t method = 0;
  std::uint32_t crc = 0;
  std::uint32_t csize = 0;
  std::uint32_t usize = 0;
  std::uint32_t local_offset = 0;
};

class ZipArchive {
 public:
  explicit ZipArchive(std::string_view bytes) : bytes_(bytes) {
    if (bytes.size() < 22) throw ImportError("not a ZIP archive");
    std::size_t eocd = std::string_view::npos;
    const std::size_t lo = bytes.size() > 65557 ? bytes.size() - 65557 : 0;
    for (std::size_t i = bytes.size() - 22 + 1; i-- > lo;) {
      if (le(bytes, i, 4) == 0x06054b50u) {
        eocd = i;
        break;
      }
    }
    if (eocd == std::string_view::npos) throw ImportError("ZIP end-of-central-directory record not found");
    const std::uint32_t count = le(bytes, eocd + 10, 2);
    const std::uint32_t cd_offset = le(bytes, eocd + 16, 4);
    if (cd_offset == 0xffffffffu) throw ImportError("ZIP64 archives are not supported");
    std::size_t p = cd_offset;
    for (std::uint32_t i = 0; i < count; ++i) {
      if (le(bytes, p, 4) != 0x02014b50u) throw ImportError("corrupt ZIP central directory");
      ZipEntry e;
      e.method = static_cast<std::uint16_t>(le(bytes, p + 10, 2));
      e.crc = le(bytes, p + 16, 4);
      e.csize = le(bytes, p + 20, 4);
      e.usize = le(bytes, p + 24, 4);
      const std::uint32_t nlen = le(bytes, p + 28, 2);
      const std::uint32_t xlen = le(bytes, p + 30, 2);
      const std::uint32_t clen = le(bytes, p + 32, 2);
      e.local_offset = le(bytes, p + 42, 4);
      if (p + 46 + nlen > bytes.size()) throw ImportError("truncated archive");
      entries_.emplace(std::string(bytes.substr(p + 46, nlen)), e);
      p += 46 + nlen + xlen + clen;
    }
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::string read(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw ImportError("archive member missing: " + name);
    const ZipEntry& e = it->second;
    if (le(bytes_, e.local_offset, 4) != 0x04034b50u) throw ImportError("corrupt local header for " + name);
    const std::size_t data = e.local_offset + 30 + le(bytes_, e.local_offset + 26, 2) + le(bytes_, e.local_offset + 28, 2);
    if (data + e.csize > bytes_.size()) throw ImportError("truncated member " + name);
    const std::string_view raw = bytes_.substr(data, e.csize);
    std::string out;
    if (e.method == 0) {
      out.assign(raw);
    } else if (e.method == 8) {
      out.resize(e.usize);
      z_stream zs{};
      if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw ImportError("zlib init failed");
      zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
      zs.avail_in = static_cast<uInt>(raw.size());
      zs.next_out = reinterpret_cast<Bytef*>(out.data());
      zs.avail_out = static_cast<uInt>(out.size());
      const int rc = inflate(&zs, Z_FINISH);
      const auto produced = zs.total_out;
      inflateEnd(&zs);
      if (rc != Z_STREAM_END || produced != e.usize) throw ImportError("corrupt deflate stream in " + name);
    } else {
      throw ImportError("unsupported compression method " + std::to_string(e.method) + " in " + name);
    }
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
    if (crc != e.crc) throw ImportError("CRC mismatch in " + name);
    return out;
  }

 private:
  std::string_view bytes_;
  std::map<std::string, ZipEntry> entries_;
};

// ---- XML helpers -------------------------------------------------------

std::string_view local_name(std::string_view tag) {
  const auto p = tag.find(':');
  return p == std::string_view::npos ? tag : tag.substr(p + 1);
}

ptree parse_xml(const std::string& text, const std::string& part) {
  ptree t;
  std::istringstream in(text);
  try {
    boost::property_tree::read_xml(in, t);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw ImportError("malformed XML in " + part + ": " + e.message());
  }
  return t;
}

const ptree* child(const ptree& t, std::string_view name) {
  for (const auto& [k, v] : t) {
    if (local_name(k) == name) return &v;
  }
  return nullptr;
}

template <typename F>
void each(const ptree& t, std::string_view name, F&& f) {
  for (const auto& [k, v] : t) {
    if (local_name(k) == name) f(v);
  }
}

std::optional<std::string> attr(const ptree& t, std::string_view name) {
  const ptree* a = child(t, "<xmlattr>");
  if (!a) return std::nullopt;
  for (const auto& [k, v] : *a) {
    if (k == name || local_name(k) == name) return v.data();
  }
  return std::nullopt;
}

/// Attribute with an exact (prefixed) name, e.g. "r:id".
std::optional<std::string> attr_exact(const ptree& t, std::string_view suffix) {
  const ptree* a = child(t, "<xmlattr>");
  if (!a) return std::nullopt;
  for (const auto& [k, v] : *a) {
    if (k.size() >= suffix.size() && std::string_view(k).substr(k.size() - suffix.size()) == suffix &&
        k.find(':') != std::string::npos) {
      return v.data();
    }
  }
  return std::nullopt;
}

double attr_num(const ptree& t, std::string_view name, double fallback) {
  if (auto v = attr(t, name)) {
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
    }
  }
  return fallback;
}

bool flag_element(const ptree& font, std::string_view name) {
  const ptree* e = child(font, name);
  if (!e) return false;
  const auto v = attr(*e, "val");
  return !v || (*v != "0" && *v != "false");
}

/// Concatenated text of <t> runs under a string item.
std::string string_item(const ptree& si) {
  std::string out;
  for (const auto& [k, v] : si) {
    const auto n = local_name(k);
    if (n == "t") {
      out += v.data();
    } else if (n == "r") {
      if (const ptree* t = child(v, "t")) out += t->data();
    }
  }
  return out;
}

// ---- Colors ------------------------------------------------------------

constexpr std::array<std::uint32_t, 12> kThemePalette{0xFFFFFF, 0x000000, 0xE7E6E6, 0x44546A, 0x4472C4, 0xED7D31,
                                                      0xA5A5A5, 0xFFC000, 0x5B9BD5, 0x70AD47, 0x0563C1, 0x954F72};

constexpr std::array<std::uint32_t, 64> kIndexedPalette{
    0x000000, 0xFFFFFF, 0xFF0000, 0x00FF00, 0x0000FF, 0xFFFF00, 0xFF00FF, 0x00FFFF, 0x000000, 0xFFFFFF, 0xFF0000,
    0x00FF00, 0x0000FF, 0xFFFF00, 0xFF00FF, 0x00FFFF, 0x800000, 0x008000, 0x000080, 0x808000, 0x800080, 0x008080,
    0xC0C0C0, 0x808080, 0x9999FF, 0x993366, 0xFFFFCC, 0xCCFFFF, 0x660066, 0xFF8080, 0x0066CC, 0xCCCCFF, 0x000080,
    0xFF00FF, 0xFFFF00, 0x00FFFF, 0x800080, 0x800000, 0x008080, 0x0000FF, 0x00CCFF, 0xCCFFFF, 0xCCFFCC, 0xFFFF99,
    0x99CCFF, 0xFF99CC, 0xCC99FF, 0xFFCC99, 0x3366FF, 0x33CCCC, 0x99CC00, 0xFFCC00, 0xFF9900, 0xFF6600, 0x666699,
    0x969696, 0x003366, 0x339966, 0x003300, 0x333300, 0x993300, 0x993366, 0x333399, 0x333333};

Rgb from_hex(std::uint32_t v) {
  return {static_cast<std::uint8_t>((v >> 16) & 0xff), static_cast<std::uint8_t>((v >> 8) & 0xff),
          static_cast<std::uint8_t>(v & 0xff)};
}

/// Resolves rgb / theme / indexed; tints are ignored. Unresolvable -> nullopt.
std::optional<Rgb> resolve_color(const ptree* c) {
  if (!c) return std::nullopt;
  if (auto rgb = attr(*c, "rgb")) {
    std::string h = *rgb;
    if (h.size() == 8) h = h.substr(2);  // ARGB
    if (h.size() != 6) return std::nullopt;
    try {
      return from_hex(static_cast<std::uint32_t>(std::stoul(h, nullptr, 16)));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (auto theme = attr(*c, "theme")) {
    const int i = std::atoi(theme->c_str());
    if (i >= 0 && i < static_cast<int>(kThemePalette.size())) return from_hex(kThemePalette[static_cast<std::size_t>(i)]);
    return std::nullopt;
  }
  if (auto idx = attr(*c, "indexed")) {
    const int i = std::atoi(idx->c_str());
    if (i >= 0 && i < 64) return from_hex(kIndexedPalette[static_cast<std::size_t>(i)]);
    if (i == 64) return Rgb{0, 0, 0};        // system foreground
    if (i == 65) return Rgb{255, 255, 255};  // system background
    return std::nullopt;
  }
  return std::nullopt;
}

// ---- Styles ------------------------------------------------------------

struct CellFormat {
  Style style;
  bool is_date = false;
};

bool date_format_code(std::string code) {
  // Drop quoted literals and bracketed sections (colors, locales).
  std::string clean;
  bool quoted = false;
  int bracket = 0;
  for (char ch : code) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (!quoted && ch == '[') {
      ++bracket;
    } else if (!quoted && ch == ']') {
      bracket = std::max(0, bracket - 1);
    } else if (!quoted && bracket == 0) {
      clean += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  return clean.find_first_of("dmy") != std::string::npos && clean.find("general") == std::string::npos;
}

bool builtin_date_format(int id) { return (id >= 14 && id <= 22) || (id >= 45 && id <= 47); }

struct Styles {
  std::vector<CellFormat> formats;
  double default_font_size = 11;
};

Styles read_styles(const ptree& root) {
  Styles st;
  const ptree* ss = child(root, "styleSheet");
  if (!ss) return st;
  std::map<int, bool> custom_dates;
  if (const ptree* nf = child(*ss, "numFmts")) {
    each(*nf, "numFmt", [&](const ptree& f) {
      custom_dates[static_cast<int>(attr_num(f, "numFmtId", -1))] = date_format_code(attr(f, "formatCode").value_or(""));
    });
  }
  struct Font {
    bool bold = false, italic = false;
    double size = 11;
    Rgb color{0, 0, 0};
  };
  std::vector<Font> fonts;
  if (const ptree* fs = child(*ss, "fonts")) {
    each(*fs, "font", [&](const ptree& f) {
      Font font;
      font.bold = flag_element(f, "b");
      font.italic = flag_element(f, "i");
      if (const ptree* sz = child(f, "sz")) font.size = attr_num(*sz, "val", 11);
      font.color = resolve_color(child(f, "color")).value_or(Rgb{0, 0, 0});
      fonts.push_back(font);
    });
  }
  if (!fonts.empty()) st.default_font_size = fonts.front().size;
  std::vector<Rgb> fills;
  if (const ptree* fs = child(*ss, "fills")) {
    each(*fs, "fill", [&](const ptree& f) {
      Rgb bg{255, 255, 255};
      if (const ptree* p = child(f, "patternFill")) {
        const std::string type = attr(*p, "patternType").value_or("none");
        if (type != "none") bg = resolve_color(child(*p, "fgColor")).value_or(Rgb{0, 0, 0});
      }
      fills.push_back(bg);
    });
  }
  if (const ptree* xfs = child(*ss, "cellXfs")) {
    each(*xfs, "xf", [&](const ptree& x) {
      CellFormat cf;
      const auto font = static_cast<std::size_t>(attr_num(x, "fontId", 0));
      const auto fill = static_cast<std::size_t>(attr_num(x, "fillId", 0));
      const int numfmt = static_cast<int>(attr_num(x, "numFmtId", 0));
      Font f = font < fonts.size() ? fonts[font] : Font{};
      cf.style.bold = f.bold;
      cf.style.italic = f.italic;
      cf.style.font_size = f.size;
      cf.style.fg = f.color;
      cf.style.bg = fill < fills.size() ? fills[fill] : Rgb{255, 255, 255};
      const auto custom = custom_dates.find(numfmt);
      cf.is_date = custom != custom_dates.end() ? custom->second : builtin_date_format(numfmt);
      st.formats.push_back(cf);
    });
  }
  return st;
}

// ---- Values ------------------------------------------------------------

std::string serial_to_date(double serial) {
  // 1900 date system with the 1900-02-29 bug: serial 60 is the phantom leap day.
  long days = static_cast<long>(std::floor(serial));
  if (days < 60) days += 1;
  const std::time_t t = static_cast<std::time_t>((days - 25569) * 86400L);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  const double frac = serial - std::floor(serial);
  if (frac > 1e-9) {
    const long secs = std::lround(frac * 86400);
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02ld:%02ld:%02ld", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  secs / 3600, (secs / 60) % 60, secs % 60);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday);
  }
  return buf;
}

std::string number_text(const std::string& raw) {
  // Trim float noise such as 0.30000000000000004.
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) return raw;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
  } catch (const std::exception&) {
    return raw;
  }
}

std::int64_t parse_iso8601(const std::string& s) {
  std::tm tm{};
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec) < 3) return 0;
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  return static_cast<std::int64_t>(timegm(&tm));
}

std::string resolve_target(std::string target) {
  if (target.starts_with("/")) return target.substr(1);
  std::string base = "xl/";
  while (target.starts_with("../")) {
    target = target.substr(3);
    base.clear();
  }
  return base + target;
}

struct SharedFormula {
  CellAddress origin;
  FormulaNode ast;
};

Sheet read_sheet(const std::string& name, const ptree& root, const std::vector<std::string>& shared_strings,
                 const Styles& styles, const ImportWarning& warn) {
  Sheet sheet(name, 0, 0);
  const ptree* ws = child(root, "worksheet");
  if (!ws) throw ImportError("sheet " + name + " has no worksheet element");
  double default_height = 15;
  double default_width = 8.43;
  if (const ptree* fmt = child(*ws, "sheetFormatPr")) {
    default_height = attr_num(*fmt, "defaultRowHeight", default_height);
    default_width = attr_num(*fmt, "defaultColWidth", attr_num(*fmt, "baseColWidth", default_width));
  }
  std::map<int, double> widths;
  if (const ptree* cols = child(*ws, "cols")) {
    each(*cols, "col", [&](const ptree& c) {
      const int lo = static_cast<int>(attr_num(c, "min", 0));
      const int hi = std::min(static_cast<int>(attr_num(c, "max", lo)), lo + 16384);
      const double w = attr_num(c, "width", default_width);
      for (int i = lo; i <= hi; ++i) widths[i] = w;
    });
  }
  std::map<std::string, SharedFormula> shared;
  const ptree* data = child(*ws, "sheetData");
  if (!data) return sheet;
  int implicit_row = 0;
  each(*data, "row", [&](const ptree& row) {
    const int r = static_cast<int>(attr_num(row, "r", implicit_row + 1));
    implicit_row = r;
    const double height = attr_num(row, "ht", default_height);
    int implicit_col = 0;
    each(row, "c", [&](const ptree& c) {
      const auto ref = attr(c, "r");
      std::string where = name + "!" + ref.value_or("?");
      try {
        Cell cell;
        cell.address = ref ? parse_a1(*ref) : CellAddress{r, implicit_col + 1};
        implicit_col = cell.address.col;
        const auto s_idx = static_cast<std::size_t>(attr_num(c, "s", 0));
        const CellFormat fmt = s_idx < styles.formats.size() ? styles.formats[s_idx] : CellFormat{};
        cell.style = fmt.style;
        if (cell.style.font_size == 0) cell.style.font_size = styles.default_font_size;
        if (styles.formats.empty()) cell.style.bg = {255, 255, 255};
        const auto w = widths.find(cell.address.col);
        cell.style.col_width = w == widths.end() ? default_width : w->second;
        cell.style.row_height = height;

        const std::string t = attr(c, "t").value_or("n");
        const ptree* v = child(c, "v");
        const std::string raw = v ? v->data() : std::string();
        if (t == "s") {
          const auto i = static_cast<std::size_t>(std::stoul(raw));
          if (i >= shared_strings.size()) throw ImportError("shared string index out of range");
          cell.value = shared_strings[i];
          cell.type = ValueType::text;
        } else if (t == "inlineStr") {
          if (const ptree* is = child(c, "is")) cell.value = string_item(*is);
          cell.type = ValueType::text;
        } else if (t == "str" || t == "e") {
          cell.value = raw;
          cell.type = ValueType::text;
        } else if (t == "b") {
          cell.value = raw == "1" ? "TRUE" : "FALSE";
          cell.type = ValueType::boolean;
        } else if (t == "d") {
          cell.value = raw.substr(0, raw.find('T') == std::string::npos ? raw.size() : raw.find('T'));
          cell.type = ValueType::date;
        } else if (!raw.empty()) {
          if (fmt.is_date) {
            cell.value = serial_to_date(std::stod(raw));
            cell.type = ValueType::date;
          } else {
            cell.value = number_text(raw);
            cell.type = ValueType::numeric;
          }
        }
        if (cell.value.empty()) cell.type = ValueType::empty;

        if (const ptree* f = child(c, "f")) {
          const std::string text = f->data();
          const std::string ftype = attr(*f, "t").value_or("normal");
          if (ftype == "shared") {
            const std::string si = attr(*f, "si").value_or("");
            if (!text.empty()) {
              FormulaNode ast = parse_formula("=" + text);
              shared[si] = {cell.address, ast};
              cell.formula = "=" + text;
            } else {
              const auto master = shared.find(si);
              if (master == shared.end()) throw ImportError("shared formula " + si + " has no master cell");
              FormulaNode ast = master->second.ast;
              shift_references(ast, cell.address.row - master->second.origin.row,
                               cell.address.col - master->second.origin.col);
              cell.formula = print_formula(ast);
            }
          } else if (ftype == "normal" && !text.empty()) {
            cell.formula = "=" + text;
          }
          // Array and data-table formulas are dropped.
        }
        if (cell.type == ValueType::empty && !cell.formula && s_idx == 0) return;
        sheet.set(std::move(cell));
      } catch (const std::exception& e) {
        if (warn) warn(where + ": " + e.what());
      }
    });
  });
  return sheet;
}

}  // namespace

Workbook import_ooxml(std::string_view bytes, const ImportWarning& warn) {
  const ZipArchive zip(bytes);
  const ptree wb_xml = parse_xml(zip.read("xl/workbook.xml"), "xl/workbook.xml");
  std::map<std::string, std::string> rels;
  if (zip.contains("xl/_rels/workbook.xml.rels")) {
    const ptree r = parse_xml(zip.read("xl/_rels/workbook.xml.rels"), "workbook rels");
    if (const ptree* root = child(r, "Relationships")) {
      each(*root, "Relationship", [&](const ptree& rel) {
        if (auto id = attr(rel, "Id"); id) rels[*id] = resolve_target(attr(rel, "Target").value_or(""));
      });
    }
  }
  std::vector<std::string> shared_strings;
  if (zip.contains("xl/sharedStrings.xml")) {
    const ptree s = parse_xml(zip.read("xl/sharedStrings.xml"), "xl/sharedStrings.xml");
    if (const ptree* sst = child(s, "sst")) each(*sst, "si", [&](const ptree& si) { shared_strings.push_back(string_item(si)); });
  }
  Styles styles;
  if (zip.contains("xl/styles.xml")) styles = read_styles(parse_xml(zip.read("xl/styles.xml"), "xl/styles.xml"));

  Workbook wb;
  if (zip.contains("docProps/core.xml")) {
    const ptree core = parse_xml(zip.read("docProps/core.xml"), "docProps/core.xml");
    if (const ptree* cp = child(core, "coreProperties")) {
      if (const ptree* m = child(*cp, "modified")) wb.last_modified = parse_iso8601(m->data());
    }
  }
  const ptree* workbook = child(wb_xml, "workbook");
  const ptree* sheets = workbook ? child(*workbook, "sheets") : nullptr;
  if (!sheets) throw ImportError("workbook.xml lists no sheets");
  std::set<std::string> names;
  int ordinal = 0;
  each(*sheets, "sheet", [&](const ptree& s) {
    ++ordinal;
    const std::string name = attr(s, "name").value_or("Sheet" + std::to_string(ordinal));
    if (!names.insert(name).second) throw ImportError("duplicate sheet name " + name);
    std::string part = "xl/worksheets/sheet" + std::to_string(ordinal) + ".xml";
    if (auto rid = attr_exact(s, ":id")) {
      if (auto it = rels.find(*rid); it != rels.end()) part = it->second;
    }
    if (!zip.contains(part)) {
      if (warn) warn("sheet " + name + ": part " + part + " missing; kept empty");
      wb.sheets.emplace_back(name, 0, 0);
      return;
    }
    wb.sheets.push_back(read_sheet(name, parse_xml(zip.read(part), part), shared_strings, styles, warn));
  });
  wb.id = content_hash(wb);
  return wb;
}

Workbook import_ooxml_file(const std::filesystem::path& path, const ImportWarning& warn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImportError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  Workbook wb = import_ooxml(bytes, warn);
  wb.id = path.stem().string();
  return wb;
}

}  // namespace formula_scout
