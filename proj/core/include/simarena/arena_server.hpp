#pragma once

// JSON-over-HTTP front end for ArenaService, consumed by the judge UI.
//
//   POST /experiments                      ExperimentSpec document
//   GET  /experiments/{id}
//   POST /experiments/{id}/pools           {records: [...], truths: {prompt_id: text}}
//   POST /sessions                         {judge_id, cohort, experiment_id?}
//   GET  /sessions/{id}
//   GET  /sessions/{id}/next
//   POST /sessions/{id}/ballots            {prompt_id, ranking: {label: rank}}
//   GET  /experiments/{id}/report
//   GET  /experiments/{id}/ballots
//
// Errors are {"code", "message"} with a 4xx status.

#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "simarena/arena.hpp"

namespace simarena {

nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
nlohmann::json session_to_json(const SessionInfo& s);
nlohmann::json next_item_to_json(const NextItem& item);

class ArenaServer {
 public:
  explicit ArenaServer(ArenaService& service);
  ~ArenaServer();

  ArenaServer(const ArenaServer&) = delete;
  ArenaServer& operator=(const ArenaServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks the calling thread until stop() is called from elsewhere.
  void listen_blocking(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ArenaService& service_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace simarena
