#include "qpnls/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace qpnls {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

Reality tag_of(const std::string& s) {
  if (s == "complex") return Reality::complex_valued;
  if (s == "real-valued") return Reality::real_valued;
  if (s == "conjugate-pair") return Reality::conjugate_pair;
  throw UsageError("read_function: unknown reality tag '" + s + "'");
}

}  // namespace

void write_function(std::ostream& os, const TorusFunction& u) {
  os << u.d << ' ' << u.N << ' ' << u.ncomp << ' ' << to_string(u.tag) << '\n';
  const TimeBox box = u.tbox();
  for (int c = 0; c < u.ncomp; ++c)
    for (long tf = 0; tf < box.count(); ++tf) {
      const std::array<int, 3> l = box.unflatten(tf);
      for (int j = -u.N; j <= u.N; ++j) {
        const cd v = u.at(c, l, j);
        for (int a = 0; a < u.d; ++a) os << l[a] << ' ';
        os << j << ' ' << fmt(v.real()) << ' ' << fmt(v.imag()) << '\n';
      }
    }
}

TorusFunction read_function(std::istream& is) {
  int d = 0, N = -1, ncomp = 0;
  std::string tag;
  if (!(is >> d >> N >> ncomp >> tag))
    throw UsageError("read_function: malformed header");
  if (d < 1 || d > 3 || N < 0 || ncomp < 1 || ncomp > 2)
    throw UsageError("read_function: header out of range");
  TorusFunction u(d, N, ncomp, tag_of(tag));
  const TimeBox box = u.tbox();
  const long per_comp = box.count() * u.nspace();
  for (int c = 0; c < ncomp; ++c)
    for (long r = 0; r < per_comp; ++r) {
      std::array<int, 3> l{0, 0, 0};
      int j = 0;
      double re = 0.0, im = 0.0;
      for (int a = 0; a < d; ++a)
        if (!(is >> l[a])) throw UsageError("read_function: truncated record");
      if (!(is >> j >> re >> im))
        throw UsageError("read_function: truncated record");
      if (!box.contains(l) || std::abs(j) > N)
        throw UsageError("read_function: mode outside the declared box");
      u.at(c, l, j) = cd(re, im);
    }
  return u;
}

void write_operator(std::ostream& os, const BlockOperator& A) {
  os << A.d << ' ' << A.J << ' ' << A.L << '\n';
  const TimeBox box = A.tbox();
  for (int sg = -1; sg <= 1; sg += 2) {
    const int si = sg == 1 ? 0 : 1;
    for (int j = -A.J; j <= A.J; ++j)
      for (int sg2 = -1; sg2 <= 1; sg2 += 2) {
        const int si2 = sg2 == 1 ? 0 : 1;
        for (int j2 = -A.J; j2 <= A.J; ++j2)
          for (long tf = 0; tf < box.count(); ++tf) {
            const std::array<int, 3> l = box.unflatten(tf);
            const cd v = A.entry(si, j, si2, j2, l);
            os << sg << ' ' << j << ' ' << sg2 << ' ' << j2;
            for (int a = 0; a < A.d; ++a) os << ' ' << l[a];
            os << ' ' << fmt(v.real()) << ' ' << fmt(v.imag()) << '\n';
          }
      }
  }
}

BlockOperator read_operator(std::istream& is) {
  int d = 0, J = -1, L = -1;
  if (!(is >> d >> J >> L)) throw UsageError("read_operator: malformed header");
  if (d < 1 || d > 3 || J < 0 || L < 0)
    throw UsageError("read_operator: header out of range");
  BlockOperator A(d, J, L);
  const TimeBox box = A.tbox();
  const long records = long(A.nrow()) * A.nrow() * box.count();
  for (long r = 0; r < records; ++r) {
    int sg = 0, j = 0, sg2 = 0, j2 = 0;
    std::array<int, 3> l{0, 0, 0};
    double re = 0.0, im = 0.0;
    if (!(is >> sg >> j >> sg2 >> j2))
      throw UsageError("read_operator: truncated record");
    for (int a = 0; a < d; ++a)
      if (!(is >> l[a])) throw UsageError("read_operator: truncated record");
    if (!(is >> re >> im))
      throw UsageError("read_operator: truncated record");
    if ((sg != 1 && sg != -1) || (sg2 != 1 && sg2 != -1) || std::abs(j) > J ||
        std::abs(j2) > J || !box.contains(l))
      throw UsageError("read_operator: entry outside the declared section");
    const int si = sg == 1 ? 0 : 1;
    const int si2 = sg2 == 1 ? 0 : 1;
    A.block(l)(A.row(si, j), A.row(si2, j2)) = cd(re, im);
  }
  return A;
}

void save_function(const std::string& path, const TorusFunction& u) {
  std::ofstream os(path);
  if (!os) throw UsageError("save_function: cannot open " + path);
  write_function(os, u);
  if (!os) throw UsageError("save_function: write failed for " + path);
}

TorusFunction load_function(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("load_function: cannot open " + path);
  return read_function(is);
}

void save_operator(const std::string& path, const BlockOperator& A) {
  std::ofstream os(path);
  if (!os) throw UsageError("save_operator: cannot open " + path);
  write_operator(os, A);
  if (!os) throw UsageError("save_operator: write failed for " + path);
}

BlockOperator load_operator(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("load_operator: cannot open " + path);
  return read_operator(is);
}

}  // namespace qpnls
