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

#include "formula_scout/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>

namespace formula_scout {
namespace {

enum class Kind { index, text, category, integer, money, rate, date, formula };

struct Value {
  std::string text;
  ValueType type = ValueType::numeric;
  double num = 0;
};

using Row = std::vector<Value>;  // indexed by 0-based column

struct Column {
  std::string header;
  Kind kind = Kind::text;
  std::vector<std::string> vocab;
  double lo = 0;
  double hi = 0;
  std::string formula;  // '#' stands for the row number
  std::function<Value(const Row&)> compute;
  std::string total;  // aggregate function for the totals row, empty for none
};

struct TableSpec {
  std::string sheet;
  std::string title;
  std::vector<Column> cols;
  int base_rows = 16;
  Rgb header_bg{0, 0, 0};
};

struct ListSpec {
  std::string sheet;
  std::string title;
  std::string item_header;
  std::vector<std::string> items;
  std::string cat_header;
  std::vector<std::string> cats;
  std::string value_header;
  int base_rows = 18;
  bool sumif = false;
  Rgb header_bg{0, 0, 0};
};

struct Family {
  TableSpec table;
  ListSpec list;
};

std::string fmt_num(double x) {
  if (std::abs(x - std::round(x)) < 1e-9) return std::to_string(static_cast<long long>(std::llround(x)));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

Value num(double x) { return {fmt_num(x), ValueType::numeric, x}; }
Value text(std::string s) { return {std::move(s), ValueType::text, 0}; }

std::string date_text(int days) {
  // Days since 2023-01-01, proleptic Gregorian.
  const long z = days + 19358 + 719468;  // 2023-01-01 is day 19358 of the Unix epoch
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const long doe = z - era * 146097;
  const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  long y = yoe + era * 400;
  const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long mp = (5 * doy + 2) / 153;
  const long d = doy - (153 * mp + 2) / 5 + 1;
  const long m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04ld-%02ld-%02ld", y, m, d);
  return buf;
}

Value date(double days) { return {date_text(static_cast<int>(days)), ValueType::date, days}; }

std::string with_row(const std::string& tmpl, int row) {
  std::string out;
  for (char c : tmpl) {
    if (c == '#') {
      out += std::to_string(row);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

Column col(std::string h, Kind k, std::vector<std::string> vocab = {}, double lo = 0, double hi = 0) {
  Column c;
  c.header = std::move(h);
  c.kind = k;
  c.vocab = std::move(vocab);
  c.lo = lo;
  c.hi = hi;
  return c;
}

Column fcol(std::string h, std::string f, std::function<Value(const Row&)> compute, std::string total = "") {
  Column c;
  c.header = std::move(h);
  c.kind = Kind::formula;
  c.formula = std::move(f);
  c.compute = std::move(compute);
  c.total = std::move(total);
  return c;
}

Column with_total(Column c, std::string fn) {
  c.total = std::move(fn);
  return c;
}

const std::vector<std::string> kFirst{"Alice", "Bruno", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hana",
                                      "Ivan", "Jia", "Kofi", "Lena", "Mateo", "Nadia", "Omar", "Priya"};
const std::vector<std::string> kLast{"Smith", "Garcia", "Okafor", "Ivanova", "Tanaka", "Muller", "Rossi", "Silva",
                                     "Kowalski", "Nguyen", "Haddad", "Larsen"};
const std::vector<std::string> kColors{"Brown", "Green", "Red", "Blue", "White", "Black"};

std::vector<Family> families() {
  std::vector<Family> f;
  // 0: expense claims
  f.push_back(
      {{"Expense Claims",
        "Quarterly expense claims",
        {col("Claim", Kind::index), col("Item", Kind::text, {"Taxi", "Hotel", "Lunch", "Flight", "Printer ink", "Parking"}),
         col("Category", Kind::category, {"Travel", "Meals", "Office", "Lodging"}), col("Qty", Kind::integer, {}, 1, 12),
         col("Unit cost", Kind::money, {}, 5, 240),
         fcol("Amount", "=D#*E#", [](const Row& r) { return num(r[3].num * r[4].num); }, "SUM"),
         fcol("Tax", "=ROUND(F#*0.08,2)", [](const Row& r) { return num(std::round(r[3].num * r[4].num * 8) / 100); },
              "SUM")},
        16,
        {31, 78, 121}},
       {"Claim Categories", "Claims by category", "Claimant", kFirst, "Category",
        {"Travel", "Meals", "Office", "Lodging"}, "Receipts", 18, true, {31, 78, 121}}});
  // 1: grade book
  f.push_back(
      {{"Gradebook",
        "Semester grades",
        {col("Student", Kind::text, kFirst), col("Section", Kind::category, {"A", "B", "C"}),
         col("Midterm", Kind::integer, {}, 40, 100), col("Final", Kind::integer, {}, 40, 100),
         fcol("Average", "=AVERAGE(C#:D#)", [](const Row& r) { return num((r[2].num + r[3].num) / 2); }, "AVERAGE"),
         fcol("Result", "=IF(E#>=60,\"Pass\",\"Fail\")",
              [](const Row& r) { return text((r[2].num + r[3].num) / 2 >= 60 ? "Pass" : "Fail"); })},
        20,
        {112, 48, 160}},
       {"Attendance Log", "Attendance by section", "Student", kFirst, "Section", {"A", "B", "C"}, "Absences", 20,
        false, {112, 48, 160}}});
  // 2: inventory
  f.push_back(
      {{"Stock Levels",
        "Warehouse stock levels",
        {col("SKU", Kind::text, {"SK-1001", "SK-1002", "SK-2040", "SK-3310", "SK-4102", "SK-5521", "SK-6060"}),
         col("Product", Kind::text, {"Bolts", "Washers", "Hinges", "Brackets", "Screws", "Anchors"}),
         col("Warehouse", Kind::category, {"North", "South", "East"}), col("On hand", Kind::integer, {}, 0, 500),
         col("Reorder at", Kind::integer, {}, 50, 200),
         fcol("Reorder", "=IF(D#<E#,\"Yes\",\"No\")",
              [](const Row& r) { return text(r[3].num < r[4].num ? "Yes" : "No"); })},
        18,
        {84, 130, 53}},
       {"Bin Locations", "Items per warehouse", "Product", {"Bolts", "Washers", "Hinges", "Brackets", "Screws"},
        "Warehouse", {"North", "South", "East"}, "Bins", 16, true, {84, 130, 53}}});
  f.back().table.cols[3].total = "SUM";
  // 3: sales ledger
  f.push_back(
      {{"Sales Ledger",
        "Regional sales",
        {col("Date", Kind::date, {}, 0, 300), col("Region", Kind::category, {"EMEA", "APAC", "AMER"}),
         col("Units", Kind::integer, {}, 1, 80), col("Price", Kind::money, {}, 10, 60),
         fcol("Revenue", "=C#*D#", [](const Row& r) { return num(r[2].num * r[3].num); }, "SUM"),
         fcol("Discount", "=IF(E#>1000,E#*0.05,0)",
              [](const Row& r) {
                double e = r[2].num * r[3].num;
                return num(e > 1000 ? e * 0.05 : 0);
              },
              "SUM")},
        22,
        {192, 80, 77}},
       {"Rep Targets", "Deals per region", "Rep", kLast, "Region", {"EMEA", "APAC", "AMER"}, "Deals", 18, true,
        {192, 80, 77}}});
  // 4: timesheet
  f.push_back(
      {{"Timesheet",
        "Weekly timesheet",
        {col("Date", Kind::date, {}, 0, 300), col("Employee", Kind::text, kFirst),
         with_total(col("Hours", Kind::integer, {}, 1, 12), "SUM"), col("Rate", Kind::money, {}, 15, 60),
         fcol("Pay", "=C#*D#", [](const Row& r) { return num(r[2].num * r[3].num); }, "SUM"),
         fcol("Overtime", "=MAX(C#-8,0)", [](const Row& r) { return num(std::max(r[2].num - 8, 0.0)); })},
        14,
        {244, 176, 40}},
       {"Shift Roster", "Shifts per team", "Employee", kFirst, "Team", {"Day", "Night", "Weekend"}, "Shifts", 16,
        false, {244, 176, 40}}});
  // 5: contact list
  f.push_back(
      {{"Contacts",
        "Customer contacts",
        {col("First", Kind::text, kFirst), col("Last", Kind::text, kLast),
         col("City", Kind::category, {"Lagos", "Osaka", "Lyon", "Quito", "Perth"}),
         col("Phone", Kind::text, {"555-0101", "555-0144", "555-0199", "555-0123", "555-0177"}),
         fcol("Full name", "=CONCAT(A#,\" \",B#)", [](const Row& r) { return text(r[0].text + " " + r[1].text); }),
         fcol("City code", "=UPPER(LEFT(C#,3))", [](const Row& r) {
           std::string s = r[2].text.substr(0, 3);
           for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
           return text(s);
         })},
        18,
        {0, 112, 192}},
       {"Mailing Groups", "Contacts per city", "Contact", kLast, "City", {"Lagos", "Osaka", "Lyon", "Quito", "Perth"},
        "Mailings", 18, false, {0, 112, 192}}});
  // 6: department budget
  f.push_back(
      {{"Budget Lines",
        "Department budget",
        {col("Line", Kind::text, {"Salaries", "Rent", "Software", "Training", "Travel", "Utilities", "Marketing"}),
         col("Department", Kind::category, {"Ops", "R&D", "Finance", "HR"}),
         with_total(col("Budget", Kind::money, {}, 1000, 9000), "SUM"),
         with_total(col("Actual", Kind::money, {}, 800, 9500), "SUM"),
         fcol("Variance", "=D#-C#", [](const Row& r) { return num(r[3].num - r[2].num); }, "SUM"),
         fcol("Variance %", "=ROUND(E#/C#,3)",
              [](const Row& r) { return num(std::round((r[3].num - r[2].num) / r[2].num * 1000) / 1000); })},
        16,
        {46, 117, 182}},
       {"Cost Centers", "Lines per department", "Owner", kLast, "Department", {"Ops", "R&D", "Finance", "HR"},
        "Lines", 16, true, {46, 117, 182}}});
  // 7: loan schedule
  f.push_back(
      {{"Loan Book",
        "Outstanding loans",
        {col("Borrower", Kind::text, kLast), with_total(col("Principal", Kind::money, {}, 1000, 50000), "SUM"),
         col("Rate", Kind::rate, {}, 0.02, 0.12), col("Years", Kind::integer, {}, 1, 30),
         fcol("Interest", "=B#*C#*D#", [](const Row& r) { return num(r[1].num * r[2].num * r[3].num); }, "SUM"),
         fcol("Repayable", "=B#+E#", [](const Row& r) { return num(r[1].num + r[1].num * r[2].num * r[3].num); },
              "SUM")},
        15,
        {91, 155, 213}},
       {"Loan Grades", "Loans per grade", "Borrower", kLast, "Grade", {"AAA", "AA", "A", "BBB"}, "Loans", 20, true,
        {91, 155, 213}}});
  // 8: shipments
  f.push_back(
      {{"Shipments",
        "Outbound shipments",
        {col("Order", Kind::text, {"PO-7781", "PO-7790", "PO-7802", "PO-7815", "PO-7833", "PO-7840"}),
         col("Shipped", Kind::date, {}, 0, 300), col("Carrier", Kind::category, {"DHL", "UPS", "FedEx", "Post"}),
         with_total(col("Weight kg", Kind::integer, {}, 1, 60), "SUM"),
         fcol("Cost", "=D#*2.5+10", [](const Row& r) { return num(r[3].num * 2.5 + 10); }, "SUM"),
         fcol("Due", "=B#+5", [](const Row& r) { return date(r[1].num + 5); })},
        20,
        {165, 165, 165}},
       {"Carrier Usage", "Parcels per carrier", "Destination", {"Lyon", "Quito", "Perth", "Osaka", "Lagos"}, "Carrier",
        {"DHL", "UPS", "FedEx", "Post"}, "Parcels", 18, false, {165, 165, 165}}});
  // 9: survey responses
  f.push_back(
      {{"Survey Responses",
        "Customer survey",
        {col("Respondent", Kind::text, {"R-01", "R-02", "R-03", "R-04", "R-05", "R-06", "R-07", "R-08"}),
         col("Age", Kind::integer, {}, 18, 80), col("Segment", Kind::category, {"Retail", "Wholesale", "Online"}),
         with_total(col("Score", Kind::integer, {}, 1, 10), "AVERAGE"),
         fcol("Age band", "=IF(B#<35,\"Young\",IF(B#<60,\"Middle\",\"Senior\"))",
              [](const Row& r) { return text(r[1].num < 35 ? "Young" : (r[1].num < 60 ? "Middle" : "Senior")); }),
         fcol("Score pct", "=D#/10", [](const Row& r) { return num(r[3].num / 10); })},
        24,
        {237, 125, 49}},
       {"Segment Tally", "Responses per segment", "Respondent", kFirst, "Segment", {"Retail", "Wholesale", "Online"},
        "Responses", 20, false, {237, 125, 49}}});
  return f;
}

Style data_style() {
  Style s;
  s.bg = {255, 255, 255};
  s.font_size = 11;
  s.col_width = 14;
  s.row_height = 15;
  return s;
}

Style header_style(Rgb bg) {
  Style s = data_style();
  s.bg = bg;
  s.fg = {255, 255, 255};
  s.bold = true;
  return s;
}

void put(Sheet& s, int row, int col, Value v, Style st, std::optional<std::string> formula = std::nullopt) {
  Cell c;
  c.address = {row, col};
  c.value = std::move(v.text);
  c.type = c.value.empty() ? ValueType::empty : v.type;
  c.formula = std::move(formula);
  c.style = st;
  s.set(std::move(c));
}

void put_title(Sheet& s, const std::string& title, bool subtitle, std::mt19937_64& rng) {
  Style t = data_style();
  t.bold = true;
  t.font_size = 14;
  put(s, 1, 1, text(title), t);
  if (subtitle) {
    Style st = data_style();
    st.italic = true;
    std::uniform_int_distribution<std::size_t> who(0, kFirst.size() - 1);
    put(s, 2, 1, text("Prepared by " + kFirst[who(rng)]), st);
  }
}

int jitter_rows(int base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  return std::max(3, static_cast<int>(std::lround(base * (1.0 + u(rng)))));
}

Sheet build_table(const TableSpec& spec, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  std::bernoulli_distribution notes(0.25);
  const bool subtitle = coin(rng);
  const bool with_notes = notes(rng);
  const int n = jitter_rows(spec.base_rows, rng);
  const int h = 3 + (subtitle ? 1 : 0);
  const int ncols = static_cast<int>(spec.cols.size());
  Sheet s(spec.sheet, h + n + 1, ncols + (with_notes ? 1 : 0));
  put_title(s, spec.title, subtitle, rng);
  for (int c = 0; c < ncols; ++c) put(s, h, c + 1, text(spec.cols[static_cast<std::size_t>(c)].header), header_style(spec.header_bg));
  if (with_notes) put(s, h, ncols + 1, text("Notes"), header_style(spec.header_bg));
  std::uniform_real_distribution<double> u01(0, 1);
  for (int i = 0; i < n; ++i) {
    const int row = h + 1 + i;
    Row vals(static_cast<std::size_t>(ncols));
    for (int c = 0; c < ncols; ++c) {
      const Column& cs = spec.cols[static_cast<std::size_t>(c)];
      Value& v = vals[static_cast<std::size_t>(c)];
      switch (cs.kind) {
        case Kind::index:
          v = num(i + 1);
          break;
        case Kind::text:
        case Kind::category: {
          std::uniform_int_distribution<std::size_t> pick(0, cs.vocab.size() - 1);
          v = text(cs.vocab[pick(rng)]);
          break;
        }
        case Kind::integer: {
          std::uniform_int_distribution<int> pick(static_cast<int>(cs.lo), static_cast<int>(cs.hi));
          v = num(pick(rng));
          break;
        }
        case Kind::money:
          v = num(std::round((cs.lo + (cs.hi - cs.lo) * u01(rng)) * 100) / 100);
          break;
        case Kind::rate:
          v = num(std::round((cs.lo + (cs.hi - cs.lo) * u01(rng)) * 1000) / 1000);
          break;
        case Kind::date:
          v = date(std::floor(cs.lo + (cs.hi - cs.lo) * u01(rng)));
          break;
        case Kind::formula:
          v = cs.compute(vals);
          break;
      }
      std::optional<std::string> f;
      if (cs.kind == Kind::formula) f = with_row(cs.formula, row);
      put(s, row, c + 1, v, data_style(), f);
    }
    if (with_notes && u01(rng) < 0.3) put(s, row, ncols + 1, text("check"), data_style());
  }
  // Totals row.
  const int tr = h + n + 1;
  Style bold = data_style();
  bold.bold = true;
  put(s, tr, 1, text("Total"), bold);
  for (int c = 0; c < ncols; ++c) {
    const Column& cs = spec.cols[static_cast<std::size_t>(c)];
    if (cs.total.empty()) continue;
    double acc = 0;
    for (int row = h + 1; row <= h + n; ++row) acc += s.find({row, c + 1})->type == ValueType::numeric
                                                          ? std::stod(s.find({row, c + 1})->value)
                                                          : 0.0;
    if (cs.total == "AVERAGE") acc /= n;
    const std::string letter = column_label(c + 1);
    put(s, tr, c + 1, num(std::round(acc * 100) / 100), bold,
        "=" + cs.total + "(" + letter + std::to_string(h + 1) + ":" + letter + std::to_string(h + n) + ")");
  }
  return s;
}

Sheet build_list(const ListSpec& spec, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  const bool subtitle = coin(rng);
  const int n = jitter_rows(spec.base_rows, rng);
  const int h = 3 + (subtitle ? 1 : 0);
  const int first = h + 1;
  const int last = h + n;
  const int sh = last + 3;
  const int ncat = static_cast<int>(spec.cats.size());
  Sheet s(spec.sheet, sh + ncat, spec.sumif ? 5 : 4);
  put_title(s, spec.title, subtitle, rng);
  const Style hs = header_style(spec.header_bg);
  put(s, h, 1, text("No."), hs);
  put(s, h, 2, text(spec.item_header), hs);
  put(s, h, 3, text(spec.cat_header), hs);
  put(s, h, 4, text(spec.value_header), hs);
  std::uniform_int_distribution<std::size_t> item(0, spec.items.size() - 1);
  std::uniform_int_distribution<std::size_t> cat(0, spec.cats.size() - 1);
  std::uniform_int_distribution<int> val(1, 40);
  std::vector<std::string> cats;
  std::vector<int> vals;
  for (int r = first; r <= last; ++r) {
    put(s, r, 1, num(r - h), data_style());
    put(s, r, 2, text(spec.items[item(rng)]), data_style());
    cats.push_back(spec.cats[cat(rng)]);
    vals.push_back(val(rng));
    put(s, r, 3, text(cats.back()), data_style());
    put(s, r, 4, num(vals.back()), data_style());
  }
  put(s, sh, 3, text(spec.cat_header), hs);
  put(s, sh, 4, text("Count"), hs);
  if (spec.sumif) put(s, sh, 5, text("Sum"), hs);
  const std::string rng_c = "C" + std::to_string(first) + ":C" + std::to_string(last);
  const std::string rng_d = "D" + std::to_string(first) + ":D" + std::to_string(last);
  for (int i = 0; i < ncat; ++i) {
    const int r = sh + 1 + i;
    const std::string& c = spec.cats[static_cast<std::size_t>(i)];
    int count = 0;
    int sum = 0;
    for (std::size_t k = 0; k < cats.size(); ++k) {
      if (cats[k] == c) {
        ++count;
        sum += vals[k];
      }
    }
    put(s, r, 3, text(c), data_style());
    put(s, r, 4, num(count), data_style(), "=COUNTIF(" + rng_c + ",C" + std::to_string(r) + ")");
    if (spec.sumif) {
      put(s, r, 5, num(sum), data_style(), "=SUMIF(" + rng_c + ",C" + std::to_string(r) + "," + rng_d + ")");
    }
  }
  return s;
}

void cap_formulas(Sheet& s, int cap) {
  if (cap <= 0) return;
  int kept = 0;
  for (const auto& addr : s.formula_cells()) {
    if (kept < cap) {
      ++kept;
      continue;
    }
    Cell c = *s.find(addr);
    c.formula.reset();
    s.set(std::move(c));
  }
}

Sheet category_sheet(const std::string& name, int header_row, int first, int last, int seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  const int sh = last + 3;
  Sheet s(name, sh + static_cast<int>(kColors.size()), 4);
  Style t = data_style();
  t.bold = true;
  t.font_size = 14;
  put(s, 1, 1, text("Paint stock by color"), t);
  const Rgb bg{68, 114, 196};
  const Style hs = header_style(bg);
  put(s, header_row, 1, text("ID"), hs);
  put(s, header_row, 2, text("Item"), hs);
  put(s, header_row, 3, text("Color"), hs);
  put(s, header_row, 4, text("Qty"), hs);
  const std::vector<std::string> items{"Gloss", "Matte", "Satin", "Primer", "Enamel"};
  std::uniform_int_distribution<std::size_t> pi(0, items.size() - 1);
  std::uniform_int_distribution<std::size_t> pc(0, kColors.size() - 1);
  std::uniform_int_distribution<int> pq(1, 25);
  std::vector<std::string> colors;
  for (int r = first; r <= last; ++r) {
    put(s, r, 1, num(r - header_row), data_style());
    put(s, r, 2, text(items[pi(rng)]), data_style());
    colors.push_back(kColors[pc(rng)]);
    put(s, r, 3, text(colors.back()), data_style());
    put(s, r, 4, num(pq(rng)), data_style());
  }
  put(s, sh, 3, text("Color"), hs);
  put(s, sh, 4, text("Count"), hs);
  const std::string range = "C" + std::to_string(first) + ":C" + std::to_string(last);
  for (std::size_t i = 0; i < kColors.size(); ++i) {
    const int r = sh + 1 + static_cast<int>(i);
    const auto count = std::count(colors.begin(), colors.end(), kColors[i]);
    put(s, r, 3, text(kColors[i]), data_style());
    put(s, r, 4, num(static_cast<double>(count)), data_style(), "=COUNTIF(" + range + ",C" + std::to_string(r) + ")");
  }
  return s;
}

}  // namespace

std::vector<Workbook> synth_corpus(const SynthConfig& cfg) {
  if (cfg.families < 1 || cfg.families > kSynthFamilies) {
    throw std::invalid_argument("families must be in [1, " + std::to_string(kSynthFamilies) + "]");
  }
  if (cfg.variants < 1) throw std::invalid_argument("variants must be >= 1");
  const auto fams = families();
  std::vector<Workbook> out;
  out.reserve(static_cast<std::size_t>(cfg.families) * static_cast<std::size_t>(cfg.variants));
  for (int f = 0; f < cfg.families; ++f) {
    for (int v = 0; v < cfg.variants; ++v) {
      std::mt19937_64 rng(cfg.seed * 1000003ull + static_cast<std::uint64_t>(f) * 10007ull + static_cast<std::uint64_t>(v));
      char id[32];
      std::snprintf(id, sizeof id, "fam%02d-v%04d", f, v);
      Workbook wb;
      wb.id = id;
      wb.last_modified = 1600000000 + static_cast<std::int64_t>(v) * 86400 + f;
      wb.sheets.push_back(build_table(fams[static_cast<std::size_t>(f)].table, rng));
      wb.sheets.push_back(build_list(fams[static_cast<std::size_t>(f)].list, rng));
      for (auto& s : wb.sheets) cap_formulas(s, cfg.formulas_per_sheet);
      out.push_back(std::move(wb));
    }
  }
  return out;
}

namespace {

struct Layout {
  int header = 0;
  int after_body = 0;  // totals row of a table, blank row under a list
};

Layout layout_of(const Sheet& s) {
  Layout l;
  l.header = s.find({2, 1}) ? 4 : 3;
  l.after_body = l.header + 1;
  for (; l.after_body <= s.n_rows(); ++l.after_body) {
    const Cell* a = s.find({l.after_body, 1});
    if (!a || a->value == "Total") break;
  }
  return l;
}

}  // namespace

std::optional<CellAddress> synth_aligned_cell(const Sheet& from, CellAddress at, const Sheet& to) {
  const Layout a = layout_of(from);
  const Layout b = layout_of(to);
  int row = 0;
  if (at.row == 1) {
    row = 1;  // title
  } else if (at.row < a.after_body) {
    row = at.row - a.header + b.header;
    if (at.row > a.header && row >= b.after_body) return std::nullopt;
  } else {
    row = at.row - a.after_body + b.after_body;
  }
  const CellAddress out{row, at.col};
  if (!to.in_bounds(out)) return std::nullopt;
  return out;
}

int synth_family(std::string_view id) {
  if (id.size() < 6 || id.substr(0, 3) != "fam") return -1;
  if (!std::isdigit(static_cast<unsigned char>(id[3])) || !std::isdigit(static_cast<unsigned char>(id[4]))) return -1;
  return (id[3] - '0') * 10 + (id[4] - '0');
}

Workbook category_count_target() {
  Workbook wb;
  wb.id = "paint-target";
  wb.last_modified = 1700000000;
  wb.sheets.push_back(category_sheet("Paint Stock", 6, 7, 37, 41));
  return wb;
}

Workbook category_count_reference() {
  Workbook wb;
  wb.id = "paint-reference";
  wb.last_modified = 1690000000;
  wb.sheets.push_back(category_sheet("Paint Stock", 5, 6, 350, 354));
  return wb;
}

}  // namespace formula_scout
