/*
 Copyright 2026 The jdmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include "jdmpc/common.hpp"

#include <iosfwd>
#include <map>
#include <mutex>

namespace jdmpc
{

enum class MessageKind
{
  local_solution, ///< a node's local optimum and its increment, sent to its scope
  feasible_input, ///< a node's merged input and predicted-state record, sent to its scope
  setup,          ///< per-time-step record distribution (not part of the iteration count)
};

const char *to_string(MessageKind kind);

struct Message
{
  int sender = 0;
  int recipient = 0;
  int round = 0;
  MessageKind kind = MessageKind::local_solution;
  Vector payload;
  Vector aux; ///< increment for local solutions, predicted states for records
  long sequence = 0; ///< assigned by the network
};

struct NetworkStats
{
  int M = 0;
  std::vector<long> per_round; ///< iteration messages in each completed round
  long cumulative = 0;         ///< sum of per_round
  long setup_messages = 0;
  long payload_bytes = 0;
  std::map<std::pair<int, int>, long> per_link;

  /// Messages a centralized controller would exchange per time step (states up, inputs down).
  long centralized_equivalent() const { return 2L * M; }
};

/// Raised on scope violations and out-of-round traffic.
class NetworkError : public std::runtime_error
{
public:
  NetworkError(int round, const std::string &what);
  int round() const { return round_; }

private:
  int round_;
};

/**
 * @brief Deterministic round-synchronous message network.
 *
 * A node may only address recipients in its scope. Messages sent during round
 * p become visible only through deliver_round(p), which closes the round and
 * returns them sorted by (sender, recipient, sequence). Sending is thread-safe.
 */
class Network
{
public:
  explicit Network(std::vector<IndexSet> scopes);

  int size() const { return static_cast<int>(scopes_.size()); }
  const IndexSet &scope(int i) const { return scopes_.at(i); }
  int current_round() const { return round_; }

  void send(Message msg);
  /// Close round @p round and return its messages; the next round is round + 1.
  std::vector<Message> deliver_round(int round);

  /// Sum over nodes of the scope sizes.
  long scope_total() const;

  NetworkStats stats() const;
  void reset_stats();

  /// Keep a copy of every delivered message for audit.
  void enable_log(bool on) { logging_ = on; }
  const std::vector<Message> &log() const { return log_; }
  /// One JSON object per line: {"seq","round","kind","from","to","len"}.
  void write_log(std::ostream &os) const;

private:
  std::vector<IndexSet> scopes_;
  std::vector<Message> pending_;
  mutable std::mutex mutex_;
  int round_ = 0;
  long next_sequence_ = 0;
  NetworkStats stats_;
  bool logging_ = false;
  std::vector<Message> log_;
};

} // namespace jdmpc
