#pragma once

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tcran {

using NodeId = std::uint32_t;
using ChannelId = std::uint32_t;
// Simulated time in ticks; one time unit is kTicksPerUnit ticks.
using SimTime = std::int64_t;
inline constexpr SimTime kTicksPerUnit = 1000;

struct NegativeCredit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroCredit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact nonnegative rational.
class Credit {
 public:
  Credit() : v_(0) {}
  Credit(long n) : v_(n) { check(); }
  Credit(long n, long d);
  explicit Credit(const mpq_class& q) : v_(q) { v_.canonicalize(); check(); }

  static Credit parse(const std::string& s);  // "3/10", "1", "0"
  std::string str() const;                    // always "num/den"

  const mpq_class& raw() const { return v_; }
  bool is_zero() const { return sgn(v_) == 0; }

  friend Credit operator+(const Credit& a, const Credit& b) {
    return Credit(mpq_class(a.v_ + b.v_));
  }
  Credit& operator+=(const Credit& o) {
    v_ += o.v_;
    return *this;
  }
  friend bool operator==(const Credit& a, const Credit& b) { return a.v_ == b.v_; }
  friend std::strong_ordering operator<=>(const Credit& a, const Credit& b) {
    int c = cmp(a.v_, b.v_);
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

 private:
  void check() const;
  mpq_class v_;
};

Credit credit_add(const Credit& a, const Credit& b);
// Throws NegativeCredit when b > a.
Credit credit_sub(const Credit& a, const Credit& b);

enum class SplitStrategy { Equal, Halving };
// q+1 positive shares summing to c; element 0 is the retained share.
std::vector<Credit> split_credit(const Credit& c, std::size_t q, SplitStrategy s);

struct SessionTag {
  std::uint64_t session = 0;
  NodeId initiator = 0;
  auto operator<=>(const SessionTag&) const = default;
};

inline bool is_stale(const SessionTag& msg, const SessionTag& local) { return msg < local; }

// Identifies one credit surrender so duplicates can be netted out at the chief.
struct SurrenderId {
  NodeId origin = 0;
  std::uint64_t seq = 0;
  auto operator<=>(const SurrenderId&) const = default;
};

// One affected node's entry in the chief's ledger.
struct PuEntry {
  std::uint64_t epoch = 0;
  Credit resident;                  // credit frozen at the affected node
  std::map<NodeId, Credit> moved;   // in-credit handed over by each reporter
  std::set<NodeId> reporters;       // reporters seen for this epoch
  Credit total() const;
  Credit moved_total() const;
  bool operator==(const PuEntry&) const = default;
};

struct ChiefLedger {
  std::map<NodeId, PuEntry> affected;
  std::set<SurrenderId> settled;
  std::map<NodeId, std::uint64_t> cleared;  // last episode closed by NaP, per node
  std::set<SurrenderId> adopted;  // handovers whose ledger this one already contains
  Credit total_credit;  // C of the computation
  Credit c_pu_sum() const;
  Credit moved_sum() const;
  bool operator==(const ChiefLedger&) const = default;
};

enum class TermMode { Weak, Strong };

namespace msg {
struct Com {
  Credit credit;
};
struct ImPC {
  Credit credit;
  std::uint32_t b = 0;
  std::map<NodeId, Credit> child_map;
  SurrenderId id;
  bool from_child = false;  // sender's parent is the receiver
  bool handover = false;    // chief executive role moves with this credit
  std::optional<ChiefLedger> ledger;
};
struct ImP {
  NodeId p = 0;
};
struct AcK {
  SurrenderId id;
};
struct AAcK {
  SurrenderId id;
};
struct TM {
  TermMode mode = TermMode::Strong;
};
struct PaN {
  NodeId affected = 0;
  std::uint64_t epoch = 0;
  Credit in_credit;
  Credit out_credit;
  Credit resident;  // heartbeat-reported holdings of the affected node
};
struct NaP {
  NodeId recovered = 0;
  std::uint64_t epoch = 0;
};
struct SpecialForward {
  Credit credit;
  NodeId origin = 0;
  SurrenderId id;
  bool from_receiver = false;  // escrow forwarded by the receiver, vs. sender retry
  std::optional<ChiefLedger> ledger;
};
struct SpecialReclaim {
  NodeId affected = 0;
};
// Chief's reply to NaP / SpecialReclaim; carries any ledgered in-credit back.
struct Refund {
  Credit credit;
  NodeId about = 0;
  bool to_in_map = false;
};
}  // namespace msg

using MessageBody = std::variant<msg::Com, msg::ImPC, msg::ImP, msg::AcK, msg::AAcK, msg::TM,
                                 msg::PaN, msg::NaP, msg::SpecialForward, msg::SpecialReclaim,
                                 msg::Refund>;

enum class MsgKind { COM, ImPC, ImP, AcK, AAcK, TM, PaN, NaP, SpecialForward, SpecialReclaim, Refund };
inline constexpr std::size_t kMsgKinds = 11;

struct Message {
  SessionTag tag;
  MessageBody body;
  MsgKind kind() const { return static_cast<MsgKind>(body.index()); }
};

const char* kind_name(MsgKind k);
bool is_control(MsgKind k);  // AcK / AAcK: top delivery priority
std::string summarize(const Message& m);

// Credit that physically travels with the message (not records or claims).
Credit carried_credit(const Message& m);

}  // namespace tcran
