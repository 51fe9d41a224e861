#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cts {

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixF = RowMatrix<float>;
using RowMatrixD = RowMatrix<double>;

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

/// Id-aligned dense vectors. Row i belongs to ids()[i].
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Throws IntegrityError on duplicate ids, row-count mismatch or
  /// non-finite entries.
  EmbeddingMatrix(std::vector<std::string> ids, RowMatrixF rows);
  /// Empty matrix of a given width.
  explicit EmbeddingMatrix(std::size_t dim) : rows_(0, static_cast<Eigen::Index>(dim)) {}

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const RowMatrixF& rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rows_.cols()); }
  std::size_t size() const noexcept { return ids_.size(); }

  /// Row index of `id`; throws IntegrityError when absent.
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.contains(id); }

  /// Rows for `ids`, in the given order.
  RowMatrixF gather(std::span<const std::string> ids) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.ids_ == b.ids_ && a.rows_.rows() == b.rows_.rows() &&
           a.rows_.cols() == b.rows_.cols() && a.rows_ == b.rows_;
  }

 private:
  std::vector<std::string> ids_;
  RowMatrixF rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Little-endian store: "CTSE", u32 version (1), u32 dim, u64 count,
/// count NUL-terminated UTF-8 ids, count*dim f32 row-major.
void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

}  // namespace cts
