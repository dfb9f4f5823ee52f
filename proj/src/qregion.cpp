#include "ctn/qregion.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ctn {
namespace {

void check_coord(Coord c) {
  if (c > kCoordLimit || c < -kCoordLimit) {
    throw BoundExceededError("coordinate magnitude exceeds 2^40: " + std::to_string(c));
  }
}

void check_same_dim(int a, int b) {
  if (a != b) {
    throw Error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// QN

QN::QN(std::vector<Coord> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw Error("QN must have dimension >= 1");
  for (Coord c : coords_) check_coord(c);
}

QN QN::zero(int dim) { return QN(std::vector<Coord>(static_cast<std::size_t>(dim), 0)); }

QN QN::operator+(const QN& o) const {
  check_same_dim(dim(), o.dim());
  std::vector<Coord> c(coords_);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] += o.coords_[k];
  return QN(std::move(c));
}

QN QN::operator-(const QN& o) const {
  check_same_dim(dim(), o.dim());
  std::vector<Coord> c(coords_);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] -= o.coords_[k];
  return QN(std::move(c));
}

QN QN::operator-() const {
  std::vector<Coord> c(coords_);
  for (Coord& v : c) v = -v;
  return QN(std::move(c));
}

std::string QN::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < coords_.size(); ++k) {
    if (k) os << ',';
    os << coords_[k];
  }
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// IntBox

IntBox::IntBox(QN lo, QN hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  check_same_dim(lo_.dim(), hi_.dim());
  for (int k = 0; k < lo_.dim(); ++k) {
    if (lo_[k] > hi_[k]) {
      throw Error("empty box: lo " + lo_.to_string() + " exceeds hi " + hi_.to_string());
    }
  }
}

bool IntBox::contains(const QN& p) const {
  check_same_dim(dim(), p.dim());
  for (int k = 0; k < dim(); ++k) {
    if (p[k] < lo_[k] || p[k] > hi_[k]) return false;
  }
  return true;
}

bool IntBox::contains_box(const IntBox& b) const {
  check_same_dim(dim(), b.dim());
  for (int k = 0; k < dim(); ++k) {
    if (b.lo()[k] < lo_[k] || b.hi()[k] > hi_[k]) return false;
  }
  return true;
}

std::uint64_t IntBox::point_count() const {
  unsigned __int128 n = 1;
  for (int k = 0; k < dim(); ++k) {
    n *= static_cast<unsigned __int128>(hi_[k] - lo_[k] + 1);
    if (n > static_cast<unsigned __int128>(UINT64_MAX)) {
      throw BoundExceededError("box point count overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(n);
}

IntBox IntBox::translated(const QN& v) const { return IntBox(lo_ + v, hi_ + v); }

std::string IntBox::to_string() const {
  return "[" + lo_.to_string() + "," + hi_.to_string() + "]";
}

std::optional<IntBox> box_intersect(const IntBox& a, const IntBox& b) {
  check_same_dim(a.dim(), b.dim());
  std::vector<Coord> lo(static_cast<std::size_t>(a.dim()));
  std::vector<Coord> hi(static_cast<std::size_t>(a.dim()));
  for (int k = 0; k < a.dim(); ++k) {
    lo[static_cast<std::size_t>(k)] = std::max(a.lo()[k], b.lo()[k]);
    hi[static_cast<std::size_t>(k)] = std::min(a.hi()[k], b.hi()[k]);
    if (lo[static_cast<std::size_t>(k)] > hi[static_cast<std::size_t>(k)]) return std::nullopt;
  }
  return IntBox(QN(std::move(lo)), QN(std::move(hi)));
}

// ---------------------------------------------------------------------------
// QRegion

QRegion::QRegion(int dim) : dim_(dim) {
  if (dim < 1) throw Error("QRegion dimension must be >= 1");
}

QRegion::QRegion(const IntBox& box) : dim_(box.dim()), boxes_{box} {}

QRegion::QRegion(int dim, std::vector<IntBox> boxes) : dim_(dim), boxes_(std::move(boxes)) {
  if (dim < 1) throw Error("QRegion dimension must be >= 1");
  for (const IntBox& b : boxes_) check_same_dim(dim_, b.dim());
  normalize();
}

QRegion QRegion::point(const QN& p) { return QRegion(IntBox(p, p)); }

namespace {

// Subtract box d from box s; appends the non-overlapping parts of s to out.
// Guillotine slicing: peel slabs off s dimension by dimension, shrinking the
// core until it lies inside d.
void subtract_box(const IntBox& s, const IntBox& d, std::vector<IntBox>& out) {
  if (!box_intersect(s, d)) {
    out.push_back(s);
    return;
  }
  std::vector<Coord> lo = s.lo().coords();
  std::vector<Coord> hi = s.hi().coords();
  for (int k = 0; k < s.dim(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (lo[ks] < d.lo()[k]) {
      std::vector<Coord> h2 = hi;
      h2[ks] = d.lo()[k] - 1;
      out.emplace_back(QN(lo), QN(std::move(h2)));
      lo[ks] = d.lo()[k];
    }
    if (hi[ks] > d.hi()[k]) {
      std::vector<Coord> l2 = lo;
      l2[ks] = d.hi()[k] + 1;
      out.emplace_back(QN(std::move(l2)), QN(hi));
      hi[ks] = d.hi()[k];
    }
  }
  // the remaining core is inside d and gets dropped
}

}  // namespace

void QRegion::normalize() {
  if (boxes_.empty()) return;
  const int m = dim_;

  // Grid cuts per dimension: every box face contributes lo and hi+1.
  std::vector<std::vector<Coord>> cuts(static_cast<std::size_t>(m));
  for (const IntBox& b : boxes_) {
    for (int k = 0; k < m; ++k) {
      cuts[static_cast<std::size_t>(k)].push_back(b.lo()[k]);
      cuts[static_cast<std::size_t>(k)].push_back(b.hi()[k] + 1);
    }
  }
  for (auto& c : cuts) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }

  // Atomize every box into grid cells. Duplicated cells (from overlapping
  // input boxes) collapse in the dedupe below.
  std::vector<IntBox> cells;
  for (const IntBox& b : boxes_) {
    // index range of covered cells per dimension
    std::vector<std::pair<std::size_t, std::size_t>> span(static_cast<std::size_t>(m));
    std::uint64_t total = 1;
    for (int k = 0; k < m; ++k) {
      const auto& c = cuts[static_cast<std::size_t>(k)];
      const std::size_t first = static_cast<std::size_t>(
          std::lower_bound(c.begin(), c.end(), b.lo()[k]) - c.begin());
      const std::size_t last = static_cast<std::size_t>(
          std::lower_bound(c.begin(), c.end(), b.hi()[k] + 1) - c.begin());
      span[static_cast<std::size_t>(k)] = {first, last};  // cells [first, last)
      total *= last - first;
      if (total > (1u << 22)) {
        throw BoundExceededError("QRegion normalization grid too large");
      }
    }
    std::vector<std::size_t> idx(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) idx[static_cast<std::size_t>(k)] = span[static_cast<std::size_t>(k)].first;
    for (;;) {
      std::vector<Coord> lo(static_cast<std::size_t>(m)), hi(static_cast<std::size_t>(m));
      for (int k = 0; k < m; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        lo[ks] = cuts[ks][idx[ks]];
        hi[ks] = cuts[ks][idx[ks] + 1] - 1;
      }
      cells.emplace_back(QN(std::move(lo)), QN(std::move(hi)));
      int k = m - 1;
      for (; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        if (++idx[ks] < span[ks].second) break;
        idx[ks] = span[ks].first;
      }
      if (k < 0) break;
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  // Merge adjacent runs, one dimension at a time. Starting from grid cells
  // this yields a decomposition that depends only on the point set.
  for (int d = m - 1; d >= 0; --d) {
    const auto ds = static_cast<std::size_t>(d);
    std::sort(cells.begin(), cells.end(), [&](const IntBox& a, const IntBox& b) {
      for (int k = 0; k < m; ++k) {
        if (k == d) continue;
        if (a.lo()[k] != b.lo()[k]) return a.lo()[k] < b.lo()[k];
        if (a.hi()[k] != b.hi()[k]) return a.hi()[k] < b.hi()[k];
      }
      return a.lo()[d] < b.lo()[d];
    });
    std::vector<IntBox> merged;
    for (const IntBox& c : cells) {
      bool joined = false;
      if (!merged.empty()) {
        const IntBox& p = merged.back();
        bool same_other = true;
        for (int k = 0; k < m && same_other; ++k) {
          if (k == d) continue;
          same_other = p.lo()[k] == c.lo()[k] && p.hi()[k] == c.hi()[k];
        }
        if (same_other && p.hi()[d] + 1 == c.lo()[d]) {
          std::vector<Coord> hi = p.hi().coords();
          hi[ds] = c.hi()[d];
          merged.back() = IntBox(p.lo(), QN(std::move(hi)));
          joined = true;
        }
      }
      if (!joined) merged.push_back(c);
    }
    cells = std::move(merged);
  }

  std::sort(cells.begin(), cells.end());
  boxes_ = std::move(cells);
}

std::uint64_t QRegion::num_points() const {
  std::uint64_t n = 0;
  for (const IntBox& b : boxes_) n += b.point_count();
  return n;
}

bool QRegion::contains(const QN& p) const {
  check_same_dim(dim_, p.dim());
  for (const IntBox& b : boxes_) {
    if (b.contains(p)) return true;
  }
  return false;
}

bool QRegion::is_subset_of(const QRegion& b) const {
  check_same_dim(dim_, b.dim_);
  return minus(b).empty();
}

QRegion QRegion::intersect(const QRegion& b) const {
  check_same_dim(dim_, b.dim_);
  std::vector<IntBox> out;
  for (const IntBox& x : boxes_) {
    for (const IntBox& y : b.boxes_) {
      if (auto z = box_intersect(x, y)) out.push_back(*z);
    }
  }
  return QRegion(dim_, std::move(out));
}

QRegion QRegion::minus(const QRegion& b) const {
  check_same_dim(dim_, b.dim_);
  std::vector<IntBox> work(boxes_);
  for (const IntBox& d : b.boxes_) {
    std::vector<IntBox> next;
    for (const IntBox& s : work) subtract_box(s, d, next);
    work = std::move(next);
    if (work.empty()) break;
  }
  return QRegion(dim_, std::move(work));
}

std::pair<QRegion, QRegion> QRegion::symdiff(const QRegion& b) const {
  return {minus(b), b.minus(*this)};
}

QRegion QRegion::shifted(const QN& v) const {
  check_same_dim(dim_, v.dim());
  std::vector<IntBox> out;
  out.reserve(boxes_.size());
  for (const IntBox& x : boxes_) out.push_back(x.translated(v));
  return QRegion(dim_, std::move(out));
}

QRegion QRegion::plus(const QRegion& b) const {
  check_same_dim(dim_, b.dim_);
  std::vector<IntBox> out;
  for (const IntBox& x : boxes_) {
    for (const IntBox& y : b.boxes_) {
      out.emplace_back(x.lo() + y.lo(), x.hi() + y.hi());
    }
  }
  return QRegion(dim_, std::move(out));
}

std::vector<QN> QRegion::enumerate_points(std::uint64_t bound) const {
  if (num_points() > bound) {
    throw BoundExceededError("QRegion has more than " + std::to_string(bound) + " points");
  }
  std::vector<QN> pts;
  pts.reserve(static_cast<std::size_t>(num_points()));
  for (const IntBox& b : boxes_) {
    std::vector<Coord> cur = b.lo().coords();
    for (;;) {
      pts.emplace_back(QN(cur));
      int k = dim_ - 1;
      for (; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        if (++cur[ks] <= b.hi()[k]) break;
        cur[ks] = b.lo()[k];
      }
      if (k < 0) break;
    }
  }
  return pts;
}

std::string QRegion::to_string() const {
  if (boxes_.empty()) return "empty";
  std::string s;
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    if (i) s += 'u';
    s += boxes_[i].to_string();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) {
      throw ParseError("region syntax: expected '" + std::string(1, c) + "' at offset " +
                       std::to_string(pos) + " in \"" + s + "\"");
    }
  }
  Coord integer() {
    skip_ws();
    const std::size_t start = pos;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start || (pos == start + 1 && !std::isdigit(static_cast<unsigned char>(s[start])))) {
      throw ParseError("region syntax: expected integer at offset " + std::to_string(start) +
                       " in \"" + s + "\"");
    }
    return std::stoll(s.substr(start, pos - start));
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
};

QN parse_qn(Cursor& c) {
  c.expect('(');
  std::vector<Coord> v;
  v.push_back(c.integer());
  while (c.eat(',')) v.push_back(c.integer());
  c.expect(')');
  return QN(std::move(v));
}

}  // namespace

QRegion QRegion::parse(const std::string& text, int dim) {
  Cursor c{text};
  c.skip_ws();
  if (text.compare(c.pos, 5, "empty") == 0) {
    c.pos += 5;
    if (!c.done()) throw ParseError("region syntax: trailing characters after 'empty'");
    if (dim < 1) throw ParseError("parsing 'empty' requires an explicit dimension");
    return QRegion(dim);
  }
  std::vector<IntBox> boxes;
  do {
    c.expect('[');
    QN lo = parse_qn(c);
    c.expect(',');
    QN hi = parse_qn(c);
    c.expect(']');
    boxes.emplace_back(std::move(lo), std::move(hi));
  } while (c.eat('u'));
  if (!c.done()) {
    throw ParseError("region syntax: trailing characters at offset " + std::to_string(c.pos));
  }
  const int d = boxes.front().dim();
  if (dim >= 1 && dim != d) {
    throw ParseError("region has dimension " + std::to_string(d) + ", expected " +
                     std::to_string(dim));
  }
  return QRegion(d, std::move(boxes));
}

}  // namespace ctn
