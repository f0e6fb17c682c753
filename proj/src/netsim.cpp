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

#include "jdmpc/netsim.hpp"

#include <algorithm>
#include <ostream>

namespace jdmpc
{

const char *to_string(MessageKind kind)
{
  switch (kind)
  {
  case MessageKind::local_solution:
    return "local-solution";
  case MessageKind::feasible_input:
    return "feasible-input";
  case MessageKind::setup:
    return "setup";
  }
  return "unknown";
}

NetworkError::NetworkError(int round, const std::string &what)
    : std::runtime_error("network round " + std::to_string(round) + ": " + what), round_(round)
{
}

Network::Network(std::vector<IndexSet> scopes) : scopes_(std::move(scopes))
{
  for (auto &s : scopes_)
    std::sort(s.begin(), s.end());
  stats_.M = size();
}

void Network::send(Message msg)
{
  std::lock_guard<std::mutex> lock(mutex_);
  if (msg.sender < 0 || msg.sender >= size())
    throw NetworkError(round_, "unknown sender " + std::to_string(msg.sender));
  const auto &sc = scopes_[msg.sender];
  if (!std::binary_search(sc.begin(), sc.end(), msg.recipient))
    throw NetworkError(round_, "node " + std::to_string(msg.sender) + " may not address node " +
                                   std::to_string(msg.recipient) + " (outside its scope)");
  if (msg.round != round_)
    throw NetworkError(round_, "message stamped for round " + std::to_string(msg.round));
  msg.sequence = next_sequence_++;
  pending_.push_back(std::move(msg));
}

std::vector<Message> Network::deliver_round(int round)
{
  std::lock_guard<std::mutex> lock(mutex_);
  if (round != round_)
    throw NetworkError(round_, "delivery requested for round " + std::to_string(round));
  std::vector<Message> out;
  out.swap(pending_);
  std::sort(out.begin(), out.end(), [](const Message &a, const Message &b) {
    return std::tie(a.sender, a.recipient, a.sequence) < std::tie(b.sender, b.recipient, b.sequence);
  });
  long counted = 0;
  for (const auto &m : out)
  {
    stats_.payload_bytes += static_cast<long>(sizeof(double) * (m.payload.size() + m.aux.size()));
    if (m.kind == MessageKind::setup)
    {
      ++stats_.setup_messages;
      continue;
    }
    ++counted;
    ++stats_.per_link[{m.sender, m.recipient}];
  }
  if (counted > 0)
  {
    stats_.per_round.push_back(counted);
    stats_.cumulative += counted;
  }
  if (logging_)
    log_.insert(log_.end(), out.begin(), out.end());
  ++round_;
  return out;
}

long Network::scope_total() const
{
  long total = 0;
  for (const auto &s : scopes_)
    total += static_cast<long>(s.size());
  return total;
}

NetworkStats Network::stats() const
{
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

void Network::reset_stats()
{
  std::lock_guard<std::mutex> lock(mutex_);
  stats_ = NetworkStats{};
  stats_.M = size();
}

void Network::write_log(std::ostream &os) const
{
  for (const auto &m : log_)
    os << "{\"seq\":" << m.sequence << ",\"round\":" << m.round << ",\"kind\":\"" << to_string(m.kind)
       << "\",\"from\":" << m.sender << ",\"to\":" << m.recipient << ",\"len\":" << (m.payload.size() + m.aux.size())
       << "}\n";
}

} // namespace jdmpc
