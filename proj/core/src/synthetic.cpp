#include "simarena/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <string_view>

#include "simarena/error.hpp"
#include "simarena/jsonl.hpp"

namespace simarena {

namespace {

struct Topic {
  std::string_view name;
  std::vector<std::string_view> asks;
  std::vector<std::string_view> replies;
};

const std::vector<Topic>& daily_topics() {
  static const std::vector<Topic> topics = {
      {"food",
       {"晚饭吃什么", "中午一起吃饭吗", "你想吃火锅还是烧烤", "楼下新开的面馆去过没", "what are you having for dinner"},
       {"我想吃火锅 好久没吃了", "随便吧 面条就行", "今天自己做饭 炒个青菜", "烧烤吧 上次那家不错",
        "just noodles tonight nothing fancy"}},
      {"weekend",
       {"周末有什么安排", "周六去爬山吗", "这周末出来玩吗", "any plans for the weekend"},
       {"周末在家躺着 太累了", "可以啊 早点出发 山上人少", "周六要加班 周日可以",
        "probably just reading at home"}},
      {"work",
       {"今天上班怎么样", "项目做完了吗", "老板又找你了吗", "how was work today"},
       {"还行 就是开会太多", "差不多了 下周上线", "别提了 又改需求", "long day but the release went out"}},
      {"weather",
       {"外面下雨了吗", "今天好冷啊", "明天天气怎么样"},
       {"下了 记得带伞", "是啊 多穿点 别感冒", "听说明天晴天 适合出门"}},
      {"travel",
       {"假期去哪玩", "机票订了吗", "上次旅游拍的照片呢"},
       {"想去海边 找个小城住几天", "订了 下周三的航班", "还没整理 回头发你"}},
      {"health",
       {"最近睡得好吗", "你还在跑步吗", "感冒好点没"},
       {"一般 老是半夜醒", "还在跑 每周三次", "好多了 就是还有点咳嗽"}},
  };
  return topics;
}

const std::vector<Topic>& opinion_topics() {
  static const std::vector<Topic> topics = {
      {"movies",
       {"你觉得那部新电影怎么样", "最近有什么好看的剧", "what did you think of the movie"},
       {"剧情一般 但是画面挺好", "我觉得节奏太慢了 看睡着了", "推荐那部纪录片 很真实",
        "honestly the ending ruined it for me"}},
      {"tech",
       {"你怎么看手机越来越贵", "要不要换新电脑", "你觉得AI会取代程序员吗"},
       {"没必要追新 够用就行", "我觉得能用就别换 省点钱", "不会吧 工具而已 还得有人懂需求"}},
      {"city",
       {"你觉得大城市好还是小城市好", "还想在这个城市待下去吗", "租房还是买房"},
       {"大城市机会多 但是太累", "看工作吧 暂时不想走", "我倾向租房 灵活一点"}},
      {"books",
       {"最近在读什么书", "你喜欢看小说吗", "电子书和纸质书你选哪个"},
       {"在读一本历史书 挺有意思", "喜欢 尤其是推理小说", "纸质书 看着舒服"}},
      {"life",
       {"你觉得什么样的生活算幸福", "工作和生活怎么平衡", "人是不是越长大越孤独"},
       {"身体健康 家人平安就够了", "下班就不看消息 这是底线", "有点吧 但是朋友贵精不贵多"}},
  };
  return topics;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }
  bool chance(int percent) { return below(100) < static_cast<std::uint64_t>(percent); }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 eng_;
};

struct Builder {
  std::vector<MessageEvent> events;
  std::size_t next_id = 0;

  void emit(Timestamp ts, Speaker who, std::string text, const std::string& conv, bool media = false) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "e%07zu", next_id++);
    MessageEvent e;
    e.event_id = buf;
    e.conversation_id = conv;
    e.timestamp = ts;
    e.speaker = who;
    e.text = std::move(text);
    e.is_media_placeholder = media;
    events.push_back(std::move(e));
  }
};

std::string year_flavour(int year_index) {
  // Older years use a slightly different register so windows differ.
  static const std::vector<std::string_view> tails = {"", "", "", " 哈", "", " 嘿嘿", "", "", " 啊", ""};
  return std::string(tails[static_cast<std::size_t>(year_index) % tails.size()]);
}

}  // namespace

SyntheticBundle make_synthetic(const SynthOptions& opts) {
  if (opts.years < 1 || opts.sessions_per_year < 1) throw DataError("synthetic: years and sessions must be positive");
  Rng rng(opts.seed);
  Builder b;
  const Timestamp start = opts.end_ts - opts.years * kSecondsPerYear;
  const Timestamp session_span = kSecondsPerYear / opts.sessions_per_year;
  std::vector<const Topic*> all;
  for (const auto& t : daily_topics()) all.push_back(&t);
  for (const auto& t : opinion_topics()) all.push_back(&t);

  for (int y = 0; y < opts.years; ++y) {
    for (int s = 0; s < opts.sessions_per_year; ++s) {
      Timestamp ts = start + y * kSecondsPerYear + s * session_span +
                     static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(session_span / 2)));
      if (ts >= opts.end_ts - 3600) ts = opts.end_ts - 3600 - static_cast<Timestamp>(rng.below(3600));
      char conv[24];
      std::snprintf(conv, sizeof(conv), "c%04d-%03d", y, s);
      const int exchanges = 2 + static_cast<int>(rng.below(3));
      for (int x = 0; x < exchanges; ++x) {
        const Topic& topic = *rng.pick(all);
        const std::string ask(rng.pick(topic.asks));
        b.emit(ts, Speaker::kInterlocutor, ask, conv);
        if (rng.chance(15)) {
          ts += 20 + static_cast<Timestamp>(rng.below(90));
          b.emit(ts, Speaker::kInterlocutor, "在吗", conv);
        }
        ts += 10 + static_cast<Timestamp>(rng.below(240));
        const int roll = static_cast<int>(rng.below(100));
        if (roll < 6) {
          b.emit(ts, Speaker::kTarget, "[图片]", conv, true);
        } else if (roll < 12) {
          b.emit(ts, Speaker::kTarget, rng.chance(50) ? "好的" : "ok", conv);
        } else if (roll < 16) {
          b.emit(ts, Speaker::kTarget, ask, conv);  // echo
        } else if (roll < 20) {
          ts += 400 + static_cast<Timestamp>(rng.below(600));  // too late to pair
          b.emit(ts, Speaker::kTarget, std::string(rng.pick(topic.replies)), conv);
        } else {
          b.emit(ts, Speaker::kTarget, std::string(rng.pick(topic.replies)) + year_flavour(y), conv);
          if (rng.chance(20)) {
            ts += 5 + static_cast<Timestamp>(rng.below(100));
            b.emit(ts, Speaker::kTarget, std::string(rng.pick(topic.replies)), conv);
          }
        }
        ts += 60 + static_cast<Timestamp>(rng.below(1200));
      }
    }
  }

  SyntheticBundle out;
  out.events = std::move(b.events);
  std::stable_sort(out.events.begin(), out.events.end(), [](const MessageEvent& a, const MessageEvent& c) {
    return a.timestamp != c.timestamp ? a.timestamp < c.timestamp : a.event_id < c.event_id;
  });

  // Held-out prompts: topic questions rephrased, truths in the target's voice.
  static const std::vector<std::string_view> daily_lead = {"对了 ", "话说 ", "诶 ", "", "hey "};
  static const std::vector<std::string_view> opinion_lead = {"认真问一下 ", "说真的 ", "你个人觉得 ", ""};
  Rng prng(opts.seed ^ 0x5bd1e995ULL);
  auto add_prompts = [&](const std::vector<Topic>& topics, std::size_t count, PromptType type,
                         const std::vector<std::string_view>& leads, const char* prefix) {
    for (std::size_t i = 0; i < count; ++i) {
      const Topic& t = topics[i % topics.size()];
      char id[24];
      std::snprintf(id, sizeof(id), "%s-%02zu", prefix, i + 1);
      Prompt p;
      p.prompt_id = id;
      p.text = std::string(leads[i % leads.size()]) + std::string(t.asks[(i / topics.size()) % t.asks.size()]);
      p.ptype = type;
      out.truths[p.prompt_id] = std::string(prng.pick(t.replies));
      out.prompts.push_back(std::move(p));
    }
  };
  add_prompts(daily_topics(), opts.daily_prompts, PromptType::kDaily, daily_lead, "daily");
  add_prompts(opinion_topics(), opts.opinion_prompts, PromptType::kOpinion, opinion_lead, "opinion");

  out.profile.display_name = "Lin";
  out.profile.profile_card = "Lin, 34, software engineer in Hangzhou. Likes hiking, hotpot and mystery novels.";
  out.profile.persona_preamble = "You are Lin, a 34-year-old software engineer living in Hangzhou.";
  return out;
}

void write_events(const std::vector<MessageEvent>& events, const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : events) {
    json j{{"ts", e.timestamp}, {"speaker", to_string(e.speaker)}, {"text", e.text}, {"id", e.event_id}};
    if (e.conversation_id) j["conv_id"] = *e.conversation_id;
    if (e.is_media_placeholder) j["media"] = true;
    out += j.dump() + "\n";
  }
  write_file_atomic(path, out);
}

void write_truths(const std::map<std::string, std::string>& truths, const std::filesystem::path& path) {
  std::string out;
  for (const auto& [id, text] : truths) out += json{{"prompt_id", id}, {"response", text}}.dump() + "\n";
  write_file_atomic(path, out);
}

void write_synthetic_bundle(const SyntheticBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_events(bundle.events, dir / "events.jsonl");
  write_prompts(bundle.prompts, dir / "prompts.jsonl");
  write_truths(bundle.truths, dir / "truths.jsonl");
  write_file_atomic(dir / "profile.json", bundle.profile.to_json().dump(2) + "\n");
}

}  // namespace simarena
