#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pstx::fec {

using Bits = std::vector<std::uint8_t>;

class LdpcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quasi-cyclic base matrix: entry -1 is a Z x Z zero block, entry s >= 0 is
/// the identity cyclically shifted so that row r has its one at column (r+s) mod Z.
struct BaseMatrix {
  int rows = 0;
  int cols = 0;
  int lift = 0;
  std::vector<int> shifts;  // row-major rows x cols

  int at(int r, int c) const { return shifts[static_cast<size_t>(r) * cols + c]; }
};

/// Parses the plain-text shift-table grammar (see docs/formats.md). Errors
/// carry the offending line number.
BaseMatrix parse_base_matrix(std::string_view text);
BaseMatrix load_base_matrix(const std::string& path);
std::string format_base_matrix(const BaseMatrix& base);

/// Shipped tables: desk scale (n = 1024, Z = 64) and full scale (n = 6144, Z = 384), both rate 3/4.
BaseMatrix desk_base_matrix();
BaseMatrix full_base_matrix();

/// Lifted sparse parity-check matrix H over GF(2) with its systematic encoder.
class ParityCheckMatrix {
 public:
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int info_bits() const { return cols_ - rows_; }
  double rate() const { return static_cast<double>(info_bits()) / cols_; }
  const BaseMatrix& base() const { return base_; }

  /// Variable indices of check row `r`.
  std::span<const int> check_row(int r) const {
    return {edge_var_.data() + check_offset_[r], edge_var_.data() + check_offset_[r + 1]};
  }
  long long edges() const { return static_cast<long long>(edge_var_.size()); }
  /// Edge range [begin, end) of check row `r`; edge e connects to variable edge_var(e).
  int check_edge_begin(int r) const { return check_offset_[r]; }
  int check_edge_end(int r) const { return check_offset_[r + 1]; }
  int edge_var(int e) const { return edge_var_[e]; }
  /// Edge ids incident to variable `v`.
  std::span<const int> var_edges(int v) const {
    return {var_edges_.data() + var_offset_[v], var_edges_.data() + var_offset_[v + 1]};
  }

  /// Number of unsatisfied checks for a hard-decision word.
  int syndrome_weight(std::span<const std::uint8_t> word) const;
  bool is_codeword(std::span<const std::uint8_t> word) const { return syndrome_weight(word) == 0; }
  /// True when the parity part has the dual-diagonal form encoded by back-substitution.
  bool structured_encoder() const { return structured_; }

 private:
  friend ParityCheckMatrix build_qc_ldpc(const BaseMatrix& base);
  friend Bits ldpc_encode(const ParityCheckMatrix& h, std::span<const std::uint8_t> info);

  BaseMatrix base_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> check_offset_;
  std::vector<int> edge_var_;
  std::vector<int> var_offset_;
  std::vector<int> var_edges_;  // edge ids grouped by variable
  bool structured_ = false;
  int mid_row_ = -1;
  int hb_shift_ = 0;
  // Dense inverse of the parity part (bit rows), used when not structured.
  std::vector<std::uint64_t> parity_inverse_;
  int inverse_words_ = 0;
};

/// Expands the base matrix; throws LdpcError for invalid shifts, rank
/// deficiency, or a parity part that admits no systematic encoder.
ParityCheckMatrix build_qc_ldpc(const BaseMatrix& base);

/// Systematic encoding: codeword = info bits followed by parity bits, H c^T = 0.
Bits ldpc_encode(const ParityCheckMatrix& h, std::span<const std::uint8_t> info);

struct DecodeResult {
  Bits bits;  // hard decisions for all n codeword bits
  bool converged = false;
  int iterations = 0;
};

constexpr double kLlrClip = 30.0;
constexpr int kDefaultMaxIter = 50;

/// Log-domain sum-product (tanh rule, product clipped to +-0.999999999) with
/// early stop on zero syndrome. LLR > 0 means bit 0 is more likely. The
/// syndrome of the channel hard decisions is checked before the first
/// iteration, so a clean codeword returns with iterations == 0.
DecodeResult ldpc_decode_bp(const ParityCheckMatrix& h, std::span<const double> llr,
                            int max_iter = kDefaultMaxIter);

/// GF(2) rank of a dense bit matrix given as rows of 0/1 bytes.
int gf2_rank(std::vector<std::vector<std::uint8_t>> rows);

}  // namespace pstx::fec
