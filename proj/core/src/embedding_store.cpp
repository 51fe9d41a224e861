#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "cts/embedding.hpp"
#include "cts/error.hpp"

namespace cts {

namespace {
constexpr char kMagic[5] = "CTSE";
constexpr std::uint32_t kVersion = 1;
}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, RowMatrixF rows)
    : ids_(std::move(ids)), rows_(std::move(rows)) {
  if (static_cast<Eigen::Index>(ids_.size()) != rows_.rows())
    throw IntegrityError("embedding matrix: " + std::to_string(ids_.size()) + " ids for " +
                         std::to_string(rows_.rows()) + " rows");
  if (!rows_.allFinite()) throw IntegrityError("embedding matrix: non-finite entry");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second)
      throw IntegrityError("embedding matrix: duplicate id '" + ids_[i] + "'");
  }
}

std::size_t EmbeddingMatrix::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw IntegrityError("no embedding for id '" + id + "'");
  return it->second;
}

RowMatrixF EmbeddingMatrix::gather(std::span<const std::string> ids) const {
  RowMatrixF out(static_cast<Eigen::Index>(ids.size()), rows_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = rows_.row(static_cast<Eigen::Index>(index_of(ids[i])));
  return out;
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  detail::write_magic(out, kMagic);
  detail::write_le<std::uint32_t>(out, kVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dim()));
  detail::write_le<std::uint64_t>(out, matrix.size());
  for (const auto& id : matrix.ids()) {
    if (id.find('\0') != std::string::npos)
      throw ArgumentError("embedding id contains NUL byte");
    out.write(id.c_str(), static_cast<std::streamsize>(id.size() + 1));
  }
  detail::write_floats(out, matrix.rows().data(), matrix.size() * matrix.dim());
  if (!out) throw ArgumentError("write failed for " + path.string());
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  detail::expect_magic(in, kMagic);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw FormatError("unsupported embedding store version " + std::to_string(version));
  const auto dim = detail::read_le<std::uint32_t>(in, "dim");
  const auto count = detail::read_le<std::uint64_t>(in, "count");
  if (dim == 0) throw FormatError("embedding store: zero dim");

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id;
    if (!std::getline(in, id, '\0') || in.eof()) throw FormatError("truncated file while reading ids");
    ids.push_back(std::move(id));
  }
  RowMatrixF rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  detail::read_floats(in, rows.data(), count * dim, "rows");
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after embedding rows");
  return EmbeddingMatrix(std::move(ids), std::move(rows));
}

}  // namespace cts
