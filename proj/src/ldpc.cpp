#include "pstx/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pstx::fec {

namespace {

constexpr double kTanhClip = 0.999999999;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LdpcError("cannot open base matrix file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Row-reduces `rows` (bit-packed, `words` per row) in place; returns rank.
int eliminate(std::vector<std::uint64_t>& m, int nrows, int ncols, int words) {
  int rank = 0;
  for (int col = 0; col < ncols && rank < nrows; ++col) {
    const int w = col / 64;
    const std::uint64_t bit = 1ull << (col % 64);
    int pivot = -1;
    for (int r = rank; r < nrows; ++r)
      if (m[static_cast<size_t>(r) * words + w] & bit) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    if (pivot != rank)
      std::swap_ranges(m.begin() + static_cast<long>(pivot) * words, m.begin() + static_cast<long>(pivot + 1) * words,
                       m.begin() + static_cast<long>(rank) * words);
    for (int r = 0; r < nrows; ++r) {
      if (r == rank || !(m[static_cast<size_t>(r) * words + w] & bit)) continue;
      for (int k = 0; k < words; ++k) m[static_cast<size_t>(r) * words + k] ^= m[static_cast<size_t>(rank) * words + k];
    }
    ++rank;
  }
  return rank;
}

bool detect_structure(const BaseMatrix& b, int& mid_row, int& hb_shift) {
  const int mb = b.rows, kb = b.cols - b.rows;
  if (mb < 3 || kb < 0) return false;
  const int x = b.at(0, kb);
  if (x < 0 || b.at(mb - 1, kb) != x || x == 0) return false;
  mid_row = -1;
  for (int r = 1; r < mb - 1; ++r) {
    const int v = b.at(r, kb);
    if (v == 0 && mid_row < 0) {
      mid_row = r;
    } else if (v != -1) {
      return false;
    }
  }
  if (mid_row < 0) return false;
  for (int j = 1; j < mb; ++j)
    for (int r = 0; r < mb; ++r) {
      const int v = b.at(r, kb + j);
      const bool on = (r == j - 1 || r == j);
      if (on ? v != 0 : v != -1) return false;
    }
  hb_shift = x;
  return true;
}

// Z-bit block helpers for the structured encoder.
void xor_shifted(std::vector<std::uint8_t>& acc, const std::uint8_t* src, int z, int shift) {
  for (int r = 0; r < z; ++r) acc[r] ^= src[(r + shift) % z];
}

}  // namespace

BaseMatrix parse_base_matrix(std::string_view text) {
  BaseMatrix b;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  int matrix_rows_read = 0;
  auto fail = [&](const std::string& msg) { throw LdpcError("base matrix line " + std::to_string(lineno) + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "lift" || first == "rows" || first == "cols") {
      if (matrix_rows_read) fail("header key after matrix rows");
      long v;
      if (!(ls >> v) || v <= 0 || v > 1 << 20) fail("expected positive integer after '" + first + "'");
      std::string extra;
      if (ls >> extra) fail("unexpected token '" + extra + "'");
      (first == "lift" ? b.lift : first == "rows" ? b.rows : b.cols) = static_cast<int>(v);
      continue;
    }
    if (!b.lift || !b.rows || !b.cols) fail("matrix row before lift/rows/cols header");
    if (matrix_rows_read == b.rows) fail("more matrix rows than declared");
    std::istringstream rs(line);
    for (int c = 0; c < b.cols; ++c) {
      long v;
      if (!(rs >> v)) fail("expected " + std::to_string(b.cols) + " shift values");
      if (v < -1 || v >= b.lift) fail("shift " + std::to_string(v) + " outside [-1, lift)");
      b.shifts.push_back(static_cast<int>(v));
    }
    std::string extra;
    if (rs >> extra) fail("unexpected token '" + extra + "'");
    ++matrix_rows_read;
  }
  if (!b.lift || !b.rows || !b.cols) throw LdpcError("base matrix: missing lift/rows/cols header");
  if (matrix_rows_read != b.rows) {
    throw LdpcError("base matrix: declared " + std::to_string(b.rows) + " rows, found " +
                    std::to_string(matrix_rows_read));
  }
  return b;
}

BaseMatrix load_base_matrix(const std::string& path) { return parse_base_matrix(read_file(path)); }

std::string format_base_matrix(const BaseMatrix& base) {
  std::ostringstream os;
  os << "lift " << base.lift << "\nrows " << base.rows << "\ncols " << base.cols << "\n";
  for (int r = 0; r < base.rows; ++r) {
    for (int c = 0; c < base.cols; ++c) os << (c ? " " : "") << base.at(r, c);
    os << "\n";
  }
  return os.str();
}

BaseMatrix desk_base_matrix() { return load_base_matrix(std::string(PSTX_DATA_DIR) + "/qc_r34_n1024.txt"); }
BaseMatrix full_base_matrix() { return load_base_matrix(std::string(PSTX_DATA_DIR) + "/qc_r34_n6144.txt"); }

int gf2_rank(std::vector<std::vector<std::uint8_t>> rows) {
  if (rows.empty()) return 0;
  const int nrows = static_cast<int>(rows.size());
  const int ncols = static_cast<int>(rows.front().size());
  const int words = (ncols + 63) / 64;
  std::vector<std::uint64_t> m(static_cast<size_t>(nrows) * words, 0);
  for (int r = 0; r < nrows; ++r)
    for (int c = 0; c < ncols; ++c)
      if (rows[r][c] & 1) m[static_cast<size_t>(r) * words + c / 64] |= 1ull << (c % 64);
  return eliminate(m, nrows, ncols, words);
}

ParityCheckMatrix build_qc_ldpc(const BaseMatrix& base) {
  if (base.rows <= 0 || base.cols <= 0 || base.lift <= 0) throw LdpcError("base matrix has an empty dimension");
  if (base.rows > base.cols) throw LdpcError("base matrix has more rows than columns");
  if (static_cast<int>(base.shifts.size()) != base.rows * base.cols) throw LdpcError("base matrix size mismatch");
  for (int s : base.shifts)
    if (s < -1 || s >= base.lift) throw LdpcError("shift value outside [-1, lift)");

  ParityCheckMatrix h;
  h.base_ = base;
  const int z = base.lift;
  h.rows_ = base.rows * z;
  h.cols_ = base.cols * z;

  h.check_offset_.reserve(h.rows_ + 1);
  h.check_offset_.push_back(0);
  for (int br = 0; br < base.rows; ++br)
    for (int r = 0; r < z; ++r) {
      for (int bc = 0; bc < base.cols; ++bc) {
        const int s = base.at(br, bc);
        if (s >= 0) h.edge_var_.push_back(bc * z + (r + s) % z);
      }
      h.check_offset_.push_back(static_cast<int>(h.edge_var_.size()));
    }

  std::vector<int> degree(h.cols_, 0);
  for (int v : h.edge_var_) ++degree[v];
  h.var_offset_.assign(h.cols_ + 1, 0);
  for (int v = 0; v < h.cols_; ++v) h.var_offset_[v + 1] = h.var_offset_[v] + degree[v];
  h.var_edges_.resize(h.edge_var_.size());
  std::vector<int> fill(h.var_offset_.begin(), h.var_offset_.end() - 1);
  for (int e = 0; e < static_cast<int>(h.edge_var_.size()); ++e) h.var_edges_[fill[h.edge_var_[e]]++] = e;

  // Full-row-rank check on H.
  const int words = (h.cols_ + 63) / 64;
  std::vector<std::uint64_t> dense(static_cast<size_t>(h.rows_) * words, 0);
  for (int r = 0; r < h.rows_; ++r)
    for (int e = h.check_offset_[r]; e < h.check_offset_[r + 1]; ++e) {
      const int v = h.edge_var_[e];
      dense[static_cast<size_t>(r) * words + v / 64] ^= 1ull << (v % 64);
    }
  if (eliminate(dense, h.rows_, h.cols_, words) != h.rows_) throw LdpcError("parity-check matrix is rank deficient");

  h.structured_ = detect_structure(base, h.mid_row_, h.hb_shift_);
  if (!h.structured_) {
    // Invert the square parity part [H_p | I] by Gauss-Jordan.
    const int m = h.rows_, k = h.info_bits();
    const int aw = (2 * m + 63) / 64;
    std::vector<std::uint64_t> aug(static_cast<size_t>(m) * aw, 0);
    for (int r = 0; r < m; ++r) {
      for (int e = h.check_offset_[r]; e < h.check_offset_[r + 1]; ++e) {
        const int v = h.edge_var_[e];
        if (v >= k) aug[static_cast<size_t>(r) * aw + (v - k) / 64] ^= 1ull << ((v - k) % 64);
      }
      aug[static_cast<size_t>(r) * aw + (m + r) / 64] |= 1ull << ((m + r) % 64);
    }
    if (eliminate(aug, m, m, aw) != m) throw LdpcError("parity part is singular; no systematic encoder");
    h.inverse_words_ = (m + 63) / 64;
    h.parity_inverse_.assign(static_cast<size_t>(m) * h.inverse_words_, 0);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        const int col = m + c;
        if (aug[static_cast<size_t>(r) * aw + col / 64] >> (col % 64) & 1ull)
          h.parity_inverse_[static_cast<size_t>(r) * h.inverse_words_ + c / 64] |= 1ull << (c % 64);
      }
  }
  return h;
}

int ParityCheckMatrix::syndrome_weight(std::span<const std::uint8_t> word) const {
  if (static_cast<int>(word.size()) != cols_) throw LdpcError("word length does not match code length");
  int weight = 0;
  for (int r = 0; r < rows_; ++r) {
    std::uint8_t s = 0;
    for (int e = check_offset_[r]; e < check_offset_[r + 1]; ++e) s ^= word[edge_var_[e]] & 1;
    weight += s;
  }
  return weight;
}

Bits ldpc_encode(const ParityCheckMatrix& h, std::span<const std::uint8_t> info) {
  const int k = h.info_bits();
  if (static_cast<int>(info.size()) != k) {
    throw LdpcError("info length " + std::to_string(info.size()) + " != k = " + std::to_string(k));
  }
  Bits cw(h.cols_, 0);
  for (int i = 0; i < k; ++i) cw[i] = info[i] & 1;

  // Partial syndromes of the information part, one bit per check row.
  std::vector<std::uint8_t> lambda(h.rows_, 0);
  for (int r = 0; r < h.rows_; ++r) {
    std::uint8_t s = 0;
    for (int e = h.check_offset_[r]; e < h.check_offset_[r + 1]; ++e) {
      const int v = h.edge_var_[e];
      if (v < k) s ^= cw[v];
    }
    lambda[r] = s;
  }

  if (h.structured_) {
    const int z = h.base_.lift, mb = h.base_.rows;
    std::vector<std::uint8_t> p0(z, 0);
    for (int i = 0; i < mb; ++i)
      for (int r = 0; r < z; ++r) p0[r] ^= lambda[i * z + r];
    std::vector<std::vector<std::uint8_t>> p(mb, std::vector<std::uint8_t>(z, 0));
    p[0] = p0;
    // Back-substitution down the dual-diagonal staircase.
    std::vector<std::uint8_t> next(lambda.begin(), lambda.begin() + z);
    xor_shifted(next, p0.data(), z, h.hb_shift_);
    p[1] = next;
    for (int i = 1; i + 1 < mb; ++i) {
      std::vector<std::uint8_t> nx(lambda.begin() + i * z, lambda.begin() + (i + 1) * z);
      for (int r = 0; r < z; ++r) nx[r] ^= p[i][r];
      if (i == h.mid_row_)
        for (int r = 0; r < z; ++r) nx[r] ^= p0[r];
      p[i + 1] = std::move(nx);
    }
    for (int i = 0; i < mb; ++i)
      for (int r = 0; r < z; ++r) cw[k + i * z + r] = p[i][r];
  } else {
    const int m = h.rows_;
    std::vector<std::uint64_t> t((m + 63) / 64, 0);
    for (int r = 0; r < m; ++r)
      if (lambda[r]) t[r / 64] |= 1ull << (r % 64);
    for (int r = 0; r < m; ++r) {
      std::uint64_t acc = 0;
      for (int w = 0; w < h.inverse_words_; ++w) acc ^= h.parity_inverse_[static_cast<size_t>(r) * h.inverse_words_ + w] & t[w];
      cw[k + r] = static_cast<std::uint8_t>(std::popcount(acc) & 1);
    }
  }
#ifndef NDEBUG
  if (!h.is_codeword(cw)) throw LdpcError("encoder produced a non-codeword");
#endif
  return cw;
}

DecodeResult ldpc_decode_bp(const ParityCheckMatrix& h, std::span<const double> llr, int max_iter) {
  const int n = h.cols();
  if (static_cast<int>(llr.size()) != n) throw LdpcError("LLR length does not match code length");
  std::vector<double> channel(n);
  for (int v = 0; v < n; ++v) channel[v] = std::clamp(llr[v], -kLlrClip, kLlrClip);

  DecodeResult res;
  res.bits.resize(n);
  for (int v = 0; v < n; ++v) res.bits[v] = channel[v] < 0;
  if (h.is_codeword(res.bits) || max_iter <= 0) {
    res.converged = h.is_codeword(res.bits);
    return res;
  }

  const auto edges = static_cast<size_t>(h.edges());
  std::vector<double> v2c(edges), c2v(edges, 0.0);
  for (size_t e = 0; e < edges; ++e) v2c[e] = channel[h.edge_var(static_cast<int>(e))];
  std::vector<double> t, prefix;

  for (int it = 1; it <= max_iter; ++it) {
    for (int r = 0; r < h.rows(); ++r) {
      const int b = h.check_edge_begin(r), end = h.check_edge_end(r);
      const int deg = end - b;
      t.resize(deg);
      prefix.resize(deg + 1);
      for (int j = 0; j < deg; ++j) t[j] = std::tanh(0.5 * v2c[b + j]);
      prefix[0] = 1.0;
      for (int j = 0; j < deg; ++j) prefix[j + 1] = prefix[j] * t[j];
      double suffix = 1.0;
      for (int j = deg - 1; j >= 0; --j) {
        const double prod = std::clamp(prefix[j] * suffix, -kTanhClip, kTanhClip);
        c2v[b + j] = 2.0 * std::atanh(prod);
        suffix *= t[j];
      }
    }
    for (int v = 0; v < n; ++v) {
      double total = channel[v];
      for (int e : h.var_edges(v)) total += c2v[e];
      for (int e : h.var_edges(v)) v2c[e] = total - c2v[e];
      res.bits[v] = total < 0;
    }
    res.iterations = it;
    if (h.is_codeword(res.bits)) {
      res.converged = true;
      return res;
    }
  }
  res.converged = false;
  return res;
}

}  // namespace pstx::fec
