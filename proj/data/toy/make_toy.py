"""Regenerates the bundled toy classroom (transcript.csv, roster.csv).

Lesson L0 reproduces three published excerpts verbatim; lessons L1..L6 are
synthetic small-group talk built from phrases the mock rule table knows.
"""
import csv
import random

rng = random.Random(7)

MALE = ["Armando", "Daniel", "Diego", "Gio", "Julian", "Kevin", "Marco", "Ruben", "William"]
FEMALE = ["Angelina", "Esther", "Isabel", "Jessica", "Keila", "Kimberly", "Maria", "Melissa",
          "Mya", "Natalie", "Samantha"]
STUDENTS = sorted(MALE + FEMALE)

EXCERPTS = {
    "T2": [
        ("Kimberly", "I thought you did just it by 5 because like (points to N's notebook).", "Natalie"),
        ("Natalie", "Then I got to 5s and made 10, so I put 5 and 5 to (inaudible). And then I counted how much there was both and…it was 35.", ""),
        ("Kimberly", "Okay. Samantha go next.", ""),
        ("Samantha", "What I did was right here. I did yesterday and then I didn't have enough for everyone. And then I passed the last 10 because if I put it in with these, wouldn't it be equal and then I split it. And then I carried it in and then I divided by once, and then I counted it and then I got 1, 2, 3, 4, 5 and this was 30, and then I got 35.", ""),
        ("Kimberly", "What I did was like I did like Samantha's but I just labeled one day and two day, and then I just made a cross. Then, here I did the same thing, I got the seven 10s, but when I end up with 2, I just cross 2 off and then the 10. But then I noticed this was like that so I turned them into little 10 ones. And then I got 1, 2, 3, 4, 5, 6, 7, 8, 9. 10. I got 35.", ""),
        ("Natalie", "(has a look of disbelief) How do you know it was 35?", ""),
        ("Kimberly", "Like I counted it. 10, 20. I already knew this was 20, 30", ""),
        ("Natalie", "40.", ""),
        ("Kimberly", "(laughs)…30, 31, 32, 33, 34, 35. And that's my answer for how I got to 35. (adjusts camera) And now can I go first for the second number share?", ""),
        ("Natalie", "Yes.", ""),
    ],
    "T3": [
        ("William", "Okay so first what I did with this is I did 70 and 2. So I had two days. 1 day, 2 days, and I counted all the way up to 70 by 2, and I counted. And so now I got 32.", ""),
        ("Julian", "I disagree with you cause I got 1, 2, 3, (…), 14 (counts his 14 rods)", ""),
        ("William", "Wait hold on. You don't add 7 plus 7. If you add 7 plus 7 that would be 14. But are you trying to add? Or times?", ""),
    ],
    "T4": [
        ("Natalie", "Okay, let me go.", ""),
        ("Kimberly", "I missed a number.", ""),
        ("Natalie", "I'm looking at the hundreds chart. (refers to yellow sheet) And then I went to 75.", ""),
        ("Kimberly", "Why did you go to 75?", ""),
        ("Natalie", "Because that's how much shells…", ""),
        ("Kimberly", "(talks over N) No, it was 70.", ""),
        ("Natalie", "…that was how much shells she found.", ""),
        ("Kimberly", "It was 70.", ""),
        ("Natalie", "On the second strategy.", ""),
        ("Kimberly", "Oh!", ""),
        ("Natalie", "And then, I was thinking how could I do it. Then, I was thinking about money, I don't know why. Then, I remembered a quarter, so then I know what that is. (pause) And then, I started like because I remember the quarters, so I went 20, 25, no…", ""),
        ("Kimberly", "(talking to another group) You should keep on sharing strategies. That's what we are doing.", ""),
        ("Samantha", "We are already done.", ""),
        ("Kimberly", "We are at the strategies, but she and me realized that we strategies on the 200 chart.", ""),
    ],
}

PHRASES = {
    "exp": ["What I did was count by {a}s and I got {m}.",
            "I got {m} because I added {a} and {b}.",
            "I counted all the tens and then I got {m}.",
            "I think it's {m} because {a} plus {b} is {m}.",
            "So I split it into {a} and {b}.",
            "I noticed the ones make another ten, so I got {m}."],
    "medium": ["How do you know it was {m}?", "Why did you add {a}?", "How did you get {m}?",
               "What do you mean by the tens?"],
    "high": ["I disagree, you can't split it like that because {a} is odd.",
             "I disagree with you cause I got {c}.",
             "That's not right because {a} plus {b} is {m}."],
    "low": ["I thought you did it by {a}s.", "No, it was {c}.", "I agree.", "Me too.", "I see."],
    "unc": ["Okay, your turn.", "Yes.", "{m}.", "Wait.", "Can I go next?", "Oh!", "Let me see.",
            "Where is my pencil?", "We are already done."],
}
WEIGHTS = [("exp", 0.30), ("medium", 0.12), ("high", 0.06), ("low", 0.12), ("unc", 0.40)]


def phrase(kind):
    a, b = rng.randint(2, 9), rng.randint(10, 40)
    return rng.choice(PHRASES[kind]).format(a=a, b=b, m=a + b, c=a + b + rng.choice([-2, -1, 1, 2]))


def main():
    rows = []
    for block, lines in EXCERPTS.items():
        for t, (speaker, text, addressee) in enumerate(lines):
            rows.append([f"L0-{block}-{t:03d}", "L0", block, t, speaker, text, addressee])

    # Activity differs by student so the networks have structure.
    activity = {s: rng.uniform(0.4, 2.0) for s in STUDENTS}
    for lesson in range(1, 7):
        order = STUDENTS[:]
        rng.shuffle(order)
        for g in range(4):
            group = order[5 * g:5 * g + 5]
            block = f"G{g + 1}"
            prev = None
            for t in range(rng.randint(10, 16)):
                choices = [s for s in group if s != prev]
                speaker = rng.choices(choices, weights=[activity[s] for s in choices])[0]
                kind = rng.choices([k for k, _ in WEIGHTS], weights=[w for _, w in WEIGHTS])[0]
                addressee = ""
                if kind in ("medium", "high", "low") and rng.random() < 0.15:
                    addressee = rng.choice([s for s in group if s != speaker])
                rows.append([f"L{lesson}-{block}-{t:03d}", f"L{lesson}", block, t, speaker, phrase(kind), addressee])
                prev = speaker

    with open("transcript.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["utterance_id", "lesson_id", "block_id", "turn_index", "speaker_id", "text", "addressee_id"])
        w.writerows(rows)

    with open("roster.csv", "w", newline="") as f:
        f.write("# gender: 0=male,1=female\n")
        w = csv.writer(f)
        w.writerow(["student_id", "name", "gender", "pre_score", "post_score"])
        for s in STUDENTS:
            pre = rng.randint(290, 430)
            post = min(24, max(0, round(6 + (pre - 290) / 12 + rng.gauss(0, 3))))
            if s == "Ruben":
                post = "NA"  # one missing outcome to exercise exclusion
            w.writerow([s, s, 1 if s in FEMALE else 0, pre, post])


if __name__ == "__main__":
    main()
