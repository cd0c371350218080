#pragma once

// Named parameter collections and the on-disk checkpoint container.
//
// Checkpoint layout (UTF-8 text, LF line endings, version 1):
//
//   rrhtpp-checkpoint 1
//   meta <key> <value...>            zero or more, value runs to end of line
//   tensor <name> <rows> <cols>      followed by <rows> lines of <cols>
//   <v> <v> ...                      hex-float values (printf "%a")
//   end
//
// Names and meta keys contain no whitespace. Hex floats make the round trip
// bit-exact. Readers ignore unknown meta keys.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrhtpp/error.hpp"
#include "rrhtpp/tensor.hpp"

namespace rrhtpp {

/// Ordered collection of learnable leaves, addressed by name.
class ParameterStore {
 public:
  ad::Var& add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, ad::parameter(std::move(init))});
    return entries_.back().second;
  }

  ad::Var& operator[](const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second].second;
  }
  const ad::Var& operator[](const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second].second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : entries_) n += v.value().size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, v] : entries_) v.zero_grad();
  }

  /// Deep copy of all current values, e.g. for best-epoch snapshots.
  std::vector<Tensor> values() const {
    std::vector<Tensor> out;
    out.reserve(entries_.size());
    for (const auto& [_, v] : entries_) out.push_back(v.value());
    return out;
  }
  void assign(const std::vector<Tensor>& values) {
    if (values.size() != entries_.size()) throw std::invalid_argument("parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i].same_shape(entries_[i].second.value()))
        throw std::invalid_argument("shape mismatch restoring " + entries_[i].first);
      entries_[i].second.mutable_value() = values[i];
    }
  }

 private:
  std::vector<std::pair<std::string, ad::Var>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
  const Tensor& at(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw DataError("checkpoint has no tensor '" + name + "'");
  }

  void put_parameters(const ParameterStore& params, const std::string& prefix = "") {
    for (const auto& [name, var] : params) tensors.emplace_back(prefix + name, var.value());
  }
  void load_parameters(ParameterStore& params, const std::string& prefix = "") const {
    for (auto& [name, var] : params) {
      const Tensor& t = at(prefix + name);
      if (!t.same_shape(var.value()))
        throw DataError("checkpoint tensor '" + prefix + name + "' has shape " + shape_string(t) + ", expected " +
                        shape_string(var.value()));
      var.mutable_value() = t;
    }
  }
};

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out << "rrhtpp-checkpoint 1\n";
  for (const auto& [k, v] : ck.meta) out << "meta " << k << ' ' << v << '\n';
  char buf[64];
  for (const auto& [name, t] : ck.tensors) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", t(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint ck;
  std::string line;
  if (!std::getline(in, line) || line != "rrhtpp-checkpoint 1") throw DataError("not an rrhtpp checkpoint (bad header)");
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls >> std::ws, value);
      ck.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols)) throw DataError("checkpoint: malformed tensor header: " + line);
      std::vector<double> values;
      values.reserve(rows * cols);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw DataError("checkpoint: truncated tensor " + name);
        std::istringstream vs(line);
        std::string tok;
        std::size_t n = 0;
        while (vs >> tok) {
          char* end = nullptr;
          values.push_back(std::strtod(tok.c_str(), &end));
          if (end == tok.c_str() || *end != '\0') throw DataError("checkpoint: bad number '" + tok + "' in " + name);
          ++n;
        }
        if (n != cols) throw DataError("checkpoint: row width mismatch in " + name);
      }
      ck.tensors.emplace_back(name, Tensor(rows, cols, std::move(values)));
    } else if (!kind.empty()) {
      throw DataError("checkpoint: unknown record '" + kind + "'");
    }
  }
  if (!ended) throw DataError("checkpoint: missing end marker");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  write_checkpoint(out, ck);
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace rrhtpp
