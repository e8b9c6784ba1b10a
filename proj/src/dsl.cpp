#include "semshift/dsl.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <vector>

namespace semshift::dsl {

DslError::DslError(ErrorKind kind, int line, int column, const std::string& message,
                   std::string statement)
    : std::runtime_error(message), kind_(kind), line_(line), column_(column),
      statement_(std::move(statement)) {}

std::string format_fixed4(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("format_fixed4: non-finite value");
  std::array<char, 400> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 4);
  std::string s(buf.data(), res.ptr);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string format_yaw(double yaw) {
  std::string s = format_fixed4(yaw);
  // 1.5708 and -1.5708 both fall outside the canonical half-open range.
  if (s == "1.5708") return "1.5707";
  if (s == "-1.5708") return "-1.5707";
  return s;
}

bool valid_category(std::string_view s) {
  if (s.empty()) return false;
  auto head = [](char c) { return (c >= 'a' && c <= 'z') || c == '_'; };
  auto tail = [&head](char c) { return head(c) || (c >= '0' && c <= '9'); };
  if (!head(s.front())) return false;
  for (char c : s.substr(1))
    if (!tail(c)) return false;
  return true;
}

std::string serialize(const StructuredScene& input) {
  const auto violations = validate_scene(input);
  if (!violations.empty())
    throw std::invalid_argument("serialize: invalid scene: " + violations.front().message());
  const StructuredScene scene = canonical_order(input);
  std::string out;
  auto num = [&out](double v) {
    out += ',';
    out += format_fixed4(v);
  };
  for (std::size_t i = 0; i < scene.walls.size(); ++i) {
    const auto& w = scene.walls[i];
    out += "wall_" + std::to_string(i) + "=Wall(" + format_fixed4(w.a.x);
    for (double v : {w.a.y, w.a.z, w.b.x, w.b.y, w.b.z, w.height, w.thickness}) num(v);
    out += ")\n";
  }
  int doors = 0;
  int windows = 0;
  for (const auto& o : scene.openings) {
    const bool door = o.kind == OpeningKind::Door;
    out += door ? "door_" + std::to_string(doors++) + "=Door("
                : "window_" + std::to_string(windows++) + "=Window(";
    out += "wall_" + std::to_string(o.wall_index);
    for (double v : {o.center.x, o.center.y, o.center.z, o.width, o.height}) num(v);
    out += ")\n";
  }
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const auto& b = scene.boxes[i];
    if (!valid_category(b.category))
      throw std::invalid_argument("serialize: invalid category '" + b.category + "'");
    out += "bbox_" + std::to_string(i) + "=Bbox(" + b.category;
    num(b.center.x);
    num(b.center.y);
    num(b.center.z);
    out += ',';
    out += format_yaw(b.yaw);
    for (double v : {b.size.x, b.size.y, b.size.z}) num(v);
    out += ")\n";
  }
  return out;
}

namespace {

struct Cursor {
  std::string_view line;
  std::size_t pos = 0;
  int line_no = 1;

  bool done() const { return pos >= line.size(); }
  char peek() const { return done() ? '\0' : line[pos]; }
  int column() const { return static_cast<int>(pos) + 1; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DslError(ErrorKind::Syntax, line_no, column(),
                   "line " + std::to_string(line_no) + ", column " + std::to_string(column()) +
                       ": " + msg);
  }

  void skip_space() {
    while (!done() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) {
      if (done()) fail(std::string("expected '") + c + "' before end of line");
      fail(std::string("expected '") + c + "'");
    }
    ++pos;
  }

  std::string_view identifier() {
    skip_space();
    const std::size_t start = pos;
    while (!done()) {
      const char c = line[pos];
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '_';
      if (!ok) break;
      ++pos;
    }
    if (pos == start) fail("expected identifier");
    return line.substr(start, pos - start);
  }

  double number() {
    skip_space();
    const std::size_t start = pos;
    bool negative = false;
    if (peek() == '+' || peek() == '-') {
      negative = peek() == '-';
      ++pos;
    }
    const std::size_t body = pos;
    auto digits = [this]() {
      std::size_t n = 0;
      while (!done() && line[pos] >= '0' && line[pos] <= '9') {
        ++pos;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (peek() == '.') {
      ++pos;
      mantissa += digits();
    }
    if (mantissa == 0) {
      pos = start;
      fail("expected number");
    }
    if (peek() == 'e' || peek() == 'E') {
      ++pos;
      if (peek() == '+' || peek() == '-') ++pos;
      if (digits() == 0) fail("malformed exponent");
    }
    double v = 0.0;
    const char* first = line.data() + body;
    const char* last = line.data() + pos;
    auto res = std::from_chars(first, last, v);
    if (res.ec == std::errc::result_out_of_range) {
      // Underflow to zero is harmless; overflow is not representable.
      bool nonzero_digit = false;
      for (const char* p = first; p < last && *p != 'e' && *p != 'E'; ++p)
        nonzero_digit = nonzero_digit || (*p >= '1' && *p <= '9');
      std::size_t e = std::string_view(first, static_cast<std::size_t>(last - first)).find_first_of("eE");
      const bool neg_exp = e != std::string_view::npos && first[e + 1] == '-';
      if (!nonzero_digit || neg_exp) {
        v = 0.0;
      } else {
        pos = start;
        fail("number out of range");
      }
    } else if (res.ec != std::errc() || res.ptr != last) {
      pos = start;
      fail("malformed number");
    }
    return negative ? -v : v;
  }

  int index_after(std::string_view prefix, std::string_view ident, int col) const {
    if (ident.size() <= prefix.size() || ident.substr(0, prefix.size()) != prefix)
      throw DslError(ErrorKind::Syntax, line_no, col,
                     "line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                         ": expected '" + std::string(prefix) + "<index>'");
    const std::string_view digits = ident.substr(prefix.size());
    int v = 0;
    auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    const bool canonical_digits = digits.size() == 1 || digits.front() != '0';
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || !canonical_digits)
      throw DslError(ErrorKind::Syntax, line_no, col,
                     "line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                         ": bad index in '" + std::string(ident) + "'");
    return v;
  }
};

struct Head {
  std::string_view kind;  // wall, door, window, bbox
  std::string_view ctor;  // Wall, Door, Window, Bbox
  std::size_t args;
};

constexpr std::array<Head, 4> kHeads{{{"wall", "Wall", 8},
                                      {"door", "Door", 6},
                                      {"window", "Window", 6},
                                      {"bbox", "Bbox", 8}}};

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
    line.remove_suffix(1);
  return line;
}

}  // namespace

StructuredScene parse(std::string_view text) {
  StructuredScene scene;
  std::vector<Opening> doors;
  std::vector<Opening> windows;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view raw = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const std::string_view line = strip_comment(raw);

    Cursor cur{line, 0, line_no};
    cur.skip_space();
    if (cur.done()) {
      if (end == text.size()) break;
      continue;
    }
    const std::string statement(line);
    auto semantic = [&](int col, const std::string& msg) -> DslError {
      return DslError(ErrorKind::Semantic, line_no, col,
                      msg + " at line " + std::to_string(line_no), statement);
    };

    const int lhs_col = cur.column();
    const std::string_view lhs = cur.identifier();
    const Head* head = nullptr;
    for (const auto& h : kHeads) {
      if (lhs.size() > h.kind.size() + 1 && lhs.substr(0, h.kind.size()) == h.kind &&
          lhs[h.kind.size()] == '_') {
        head = &h;
        break;
      }
    }
    if (!head) {
      cur.pos = static_cast<std::size_t>(lhs_col - 1);
      cur.fail("unknown statement '" + std::string(lhs) + "'");
    }
    const int index = cur.index_after(std::string(head->kind) + "_", lhs, lhs_col);
    cur.expect('=');
    const int ctor_col = (cur.skip_space(), cur.column());
    const std::string_view ctor = cur.identifier();
    if (ctor != head->ctor) {
      cur.pos = static_cast<std::size_t>(ctor_col - 1);
      cur.fail("expected '" + std::string(head->ctor) + "' for " + std::string(head->kind) +
               " statement");
    }
    cur.expect('(');

    std::vector<double> nums;
    std::string_view ref;
    int ref_col = 0;
    std::size_t argc = 0;
    cur.skip_space();
    if (cur.peek() == ')') cur.fail("expected " + std::to_string(head->args) + " arguments");
    for (;;) {
      cur.skip_space();
      const bool symbolic = argc == 0 && head->kind != "wall";
      if (symbolic) {
        ref_col = cur.column();
        ref = cur.identifier();
      } else {
        nums.push_back(cur.number());
      }
      ++argc;
      cur.skip_space();
      if (cur.peek() == ',') {
        if (argc == head->args) cur.fail("expected " + std::to_string(head->args) + " arguments");
        ++cur.pos;
        continue;
      }
      if (cur.peek() == ')') {
        if (argc != head->args) cur.fail("expected " + std::to_string(head->args) + " arguments");
        ++cur.pos;
        break;
      }
      if (cur.done()) cur.fail("expected ')' before end of line");
      cur.fail("expected ',' or ')'");
    }
    cur.skip_space();
    if (!cur.done()) cur.fail("unexpected trailing characters");

    for (double v : nums)
      if (!std::isfinite(v)) throw semantic(lhs_col, "non-finite value");

    auto check_index = [&](std::size_t count) {
      if (static_cast<std::size_t>(index) < count)
        throw semantic(lhs_col, "duplicate index " + std::string(lhs));
      if (static_cast<std::size_t>(index) != count)
        throw semantic(lhs_col, "non-dense index " + std::string(lhs));
    };

    if (head->kind == "wall") {
      check_index(scene.walls.size());
      WallSegment w{{nums[0], nums[1], nums[2]}, {nums[3], nums[4], nums[5]}, nums[6], nums[7]};
      StructuredScene probe;
      probe.walls.push_back(w);
      const auto v = validate_scene(probe);
      if (!v.empty()) throw semantic(lhs_col, v.front().kind);
      scene.walls.push_back(w);
    } else if (head->kind == "bbox") {
      check_index(scene.boxes.size());
      if (!valid_category(ref)) throw semantic(ref_col, "invalid category '" + std::string(ref) + "'");
      OrientedBox b;
      b.category = std::string(ref);
      b.center = {nums[0], nums[1], nums[2]};
      b.yaw = nums[3];
      b.size = {nums[4], nums[5], nums[6]};
      if (!(b.size.x > 0.0) || !(b.size.y > 0.0) || !(b.size.z > 0.0))
        throw semantic(lhs_col, "non-positive size");
      scene.boxes.push_back(canonicalize_box(b));
    } else {
      const bool door = head->kind == "door";
      auto& list = door ? doors : windows;
      check_index(list.size());
      Cursor rc{ref, 0, line_no};
      const int wall = rc.index_after("wall_", ref, ref_col);
      if (static_cast<std::size_t>(wall) >= scene.walls.size())
        throw semantic(ref_col, "dangling wall reference");
      Opening o{door ? OpeningKind::Door : OpeningKind::Window, wall,
                {nums[0], nums[1], nums[2]}, nums[3], nums[4]};
      StructuredScene probe;
      probe.walls = scene.walls;
      probe.openings.push_back(o);
      const auto v = validate_scene(probe);
      if (!v.empty()) throw semantic(lhs_col, v.front().kind);
      list.push_back(o);
    }
    if (end == text.size()) break;
  }
  scene.openings = std::move(doors);
  scene.openings.insert(scene.openings.end(), windows.begin(), windows.end());
  return scene;
}

std::string canonical(std::string_view text) { return serialize(parse(text)); }

StructuredScene quantize(const StructuredScene& scene) { return parse(serialize(scene)); }

}  // namespace semshift::dsl
