#pragma once

// Append-only JSONL log of black-box evaluations doubling as a cache.
// One record per line: {"id", "b", "w", "source", "t"}.

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gpbounds/design.hpp"
#include "gpbounds/errors.hpp"
#include "gpbounds/models.hpp"

namespace gpbounds {

struct EvaluationRecord {
  std::string id;
  Eigen::VectorXd point;  // physical
  double value = 0.0;
  std::string source;
  double timestamp = 0.0;  // seconds since the epoch
};

inline nlohmann::json to_json(const EvaluationRecord& r) {
  return {{"id", r.id},
          {"b", std::vector<double>(r.point.data(), r.point.data() + r.point.size())},
          {"w", r.value},
          {"source", r.source},
          {"t", r.timestamp}};
}

inline EvaluationRecord record_from_json(const nlohmann::json& j) {
  EvaluationRecord r;
  r.id = j.at("id").get<std::string>();
  const auto b = j.at("b").get<std::vector<double>>();
  r.point = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  r.value = j.at("w").get<double>();
  r.source = j.at("source").get<std::string>();
  r.timestamp = j.value("t", 0.0);
  if (!std::isfinite(r.value)) throw InvalidArgument("non-finite value");
  return r;
}

class EvaluationCache {
 public:
  /// Points match when their scaled infinity-norm distance is <= 1e-12.
  static constexpr double kMatchTolerance = 1e-12;

  EvaluationCache(IntervalBox box, std::string source, std::string run_id = "run")
      : box_(std::move(box)), source_(std::move(source)), run_id_(std::move(run_id)) {}

  /// Subsequent stores also append to `path`.
  void attach_log(const std::string& path) {
    std::lock_guard lock(mutex_);
    log_.open(path, std::ios::app);
    if (!log_) throw InvalidArgument("cannot open evaluation log " + path);
  }

  /// Loads records for this source from an existing log. Corrupt lines are
  /// skipped with a warning. Returns the number of records loaded.
  std::size_t replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read evaluation log " + path);
    std::lock_guard lock(mutex_);
    std::string line;
    std::size_t lineno = 0, loaded = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto rec = record_from_json(nlohmann::json::parse(line));
        if (rec.source != source_) continue;
        if (rec.point.size() != box_.dim()) throw InvalidArgument("dimension mismatch");
        records_.push_back(std::move(rec));
        ++loaded;
      } catch (const std::exception& e) {
        warnings_.push_back(path + ":" + std::to_string(lineno) + ": skipped corrupt record (" +
                            e.what() + ")");
      }
    }
    return loaded;
  }

  std::optional<double> lookup(const Eigen::VectorXd& physical) const {
    std::lock_guard lock(mutex_);
    return lookup_locked(physical);
  }

  void store(const Eigen::VectorXd& physical, double value) {
    std::lock_guard lock(mutex_);
    EvaluationRecord rec;
    rec.id = run_id_ + ":" + std::to_string(next_id_++);
    rec.point = physical;
    rec.value = value;
    rec.source = source_;
    rec.timestamp = std::chrono::duration<double>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
    if (log_.is_open()) {
      log_ << to_json(rec).dump() << '\n';
      log_.flush();
    }
    records_.push_back(std::move(rec));
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::optional<double> lookup_locked(const Eigen::VectorXd& physical) const {
    if (physical.size() != box_.dim()) return std::nullopt;
    const Eigen::VectorXd u = scale(box_, physical);
    for (const auto& r : records_)
      if ((scale(box_, r.point) - u).cwiseAbs().maxCoeff() <= kMatchTolerance) return r.value;
    return std::nullopt;
  }

  IntervalBox box_;
  std::string source_;
  std::string run_id_;
  mutable std::mutex mutex_;
  std::vector<EvaluationRecord> records_;
  std::vector<std::string> warnings_;
  std::ofstream log_;
  long next_id_ = 0;
};

/// Black box that consults the cache first and records fresh evaluations.
class CachedBlackBox {
 public:
  CachedBlackBox(BlackBox inner, std::shared_ptr<EvaluationCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  double operator()(const Eigen::VectorXd& b) const {
    if (auto hit = cache_->lookup(b)) {
      ++*hits_;
      return *hit;
    }
    const double w = inner_(b);
    if (!std::isfinite(w)) throw EvaluationError("black box returned a non-finite value");
    ++*calls_;
    cache_->store(b, w);
    return w;
  }

  long calls() const { return *calls_; }
  long hits() const { return *hits_; }

 private:
  BlackBox inner_;
  std::shared_ptr<EvaluationCache> cache_;
  std::shared_ptr<std::atomic<long>> calls_ = std::make_shared<std::atomic<long>>(0);
  std::shared_ptr<std::atomic<long>> hits_ = std::make_shared<std::atomic<long>>(0);
};

}  // namespace gpbounds
