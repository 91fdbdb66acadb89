#include "metseq/io.hpp"

namespace metseq {

std::string expect_line(std::istream& in, const std::string& context) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("unexpected end of stream while reading " + context);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace metseq
