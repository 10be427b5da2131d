#pragma once

/*
 * Line-oriented text dumps for coefficient functions and operator sections,
 * printed with 17 significant digits so a write/read round trip is
 * bit-exact. Used by the command line driver for golden files.
 *
 *   function: header "d N components reality_tag", then one record per
 *             mode, components in order, "l_1 ... l_d j re im";
 *   operator: header "d J L", then one record per entry,
 *             "sigma j sigma' j' l_1 ... l_d re im",
 *             sorted lexicographically in exactly that key order.
 */

#include <iosfwd>
#include <string>

#include "qpnls/block_operator.hpp"
#include "qpnls/torus_function.hpp"

namespace qpnls {

void write_function(std::ostream& os, const TorusFunction& u);
TorusFunction read_function(std::istream& is);

void write_operator(std::ostream& os, const BlockOperator& A);
BlockOperator read_operator(std::istream& is);

/* Path convenience wrappers; throw UsageError when the file cannot be
 * opened or parsed. */
void save_function(const std::string& path, const TorusFunction& u);
TorusFunction load_function(const std::string& path);
void save_operator(const std::string& path, const BlockOperator& A);
BlockOperator load_operator(const std::string& path);

}  // namespace qpnls
