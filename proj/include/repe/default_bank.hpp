#pragma once

#include <string_view>

namespace repe {

// Built-in scenario families. Fragments may use "{other}" for the comparison
// person; the name is drawn from the family's name list.
inline constexpr std::string_view default_template_bank_json = R"JSON({
  "version": 1,
  "families": [
    {
      "id": "baseball", "domain": "sports",
      "names": ["Mike", "Tyler", "Jake", "Ryan"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "You are a benchwarmer for the college baseball team, and becoming the ace pitcher has been your biggest dream throughout your four years."},
          {"polarity": 1, "text": "You have pitched since little league, and earning the starting spot on the college team is the thing you care about most."},
          {"polarity": 0, "text": "You joined the baseball team just to get your PE credits and have no interest in the games."},
          {"polarity": 0, "text": "You only signed up for the baseball team because your roommate dragged you along, and you rarely think about the sport."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday afternoon at practice,"},
          {"polarity": 0, "text": "On a Thursday afternoon at practice,"}
        ],
        "failure": [
          {"polarity": 1, "text": "the coach announces that you will remain on the bench."},
          {"polarity": 0, "text": "the coach announces that all the reserves will remain on the bench."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Meanwhile, your teammate, {other}, is officially named the starting ace pitcher right after throwing a perfect curveball."},
          {"polarity": 0, "text": "{other}, who worked very hard but still didn't make the cut, is packing up his gear nearby."}
        ]
      }
    },
    {
      "id": "swimming", "domain": "sports",
      "names": ["Jordan", "Chris", "Leo", "Marcus"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "You have trained as a competitive swimmer since childhood, and qualifying for the national championships is what you live for."},
          {"polarity": 1, "text": "Swimming is the center of your life, and you have organized every day of the past three years around making the national team."},
          {"polarity": 0, "text": "You signed up for the swim club only because your roommate needed a carpool partner, and you rarely think about racing."},
          {"polarity": 0, "text": "You swim on the club team to stay in shape and have never cared about competing."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday morning at the pool,"},
          {"polarity": 0, "text": "On a Thursday morning at the pool,"}
        ],
        "failure": [
          {"polarity": 1, "text": "your coach posts the relay list and your name is missing."},
          {"polarity": 0, "text": "your coach announces that the relay has been cancelled for everyone this season."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Your lane-mate, {other}, is picked as the anchor swimmer after setting a new club record."},
          {"polarity": 0, "text": "{other}, who also missed the cut, is quietly packing his towel beside you."}
        ]
      }
    },
    {
      "id": "olympiad", "domain": "academics",
      "names": ["Priya", "Hannah", "Mei", "Sofia"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "Mathematics is the core of who you are, and winning a medal at the olympiad has been your goal since middle school."},
          {"polarity": 1, "text": "You think of yourself as a mathematician first, and the olympiad is the competition you have prepared for all year."},
          {"polarity": 0, "text": "You entered the math olympiad only because your teacher offered extra credit, and math has never mattered much to you."},
          {"polarity": 0, "text": "You took the olympiad exam on a whim with some friends and do not plan to study math after school."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday after class,"},
          {"polarity": 0, "text": "On a Thursday after class,"}
        ],
        "failure": [
          {"polarity": 1, "text": "the results show that you did not qualify for the final round."},
          {"polarity": 0, "text": "the organizers announce that nobody from your school qualified for the final round."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Your classmate, {other}, is announced as the top scorer in the region and invited to the national camp."},
          {"polarity": 0, "text": "{other}, who studied just as hard, also missed the cutoff and is sighing at the results board."}
        ]
      }
    },
    {
      "id": "piano", "domain": "arts",
      "names": ["Elena", "Clara", "Nora", "Ivy"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "Playing the piano defines you, and a place at the conservatory has been your dream for years."},
          {"polarity": 1, "text": "You practice the piano six hours a day because becoming a concert pianist is the only future you want."},
          {"polarity": 0, "text": "You take piano lessons only because your parents insist, and you have no plans to keep playing."},
          {"polarity": 0, "text": "Piano is a casual hobby for you, something you do now and then to relax."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday evening at the recital hall,"},
          {"polarity": 0, "text": "On a Thursday evening at the recital hall,"}
        ],
        "failure": [
          {"polarity": 1, "text": "the jury tells you that your audition was not strong enough."},
          {"polarity": 0, "text": "the jury explains that this year no student from the studio will advance."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Meanwhile, your studio partner, {other}, receives a full scholarship after a flawless performance."},
          {"polarity": 0, "text": "{other}, who stumbled through her piece too, is waiting quietly for her ride home."}
        ]
      }
    },
    {
      "id": "painting", "domain": "arts",
      "names": ["Sam", "Robin", "Alexis", "Jamie"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "You see yourself first and foremost as a painter, and getting into the city gallery show is everything to you."},
          {"polarity": 1, "text": "Painting is how you understand yourself, and you have spent two years preparing a portfolio for the city gallery."},
          {"polarity": 0, "text": "You joined the community painting class to kill time on weekends and do not care much about exhibitions."},
          {"polarity": 0, "text": "You paint occasionally because a friend gave you a set of brushes, and you have no artistic ambitions."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday afternoon at the studio,"},
          {"polarity": 0, "text": "On a Thursday afternoon at the studio,"}
        ],
        "failure": [
          {"polarity": 1, "text": "the curator returns your canvas with a polite rejection."},
          {"polarity": 0, "text": "the curator announces that the exhibition has been postponed and no works were selected."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Your friend from class, {other}, has three paintings chosen for the main wall of the show."},
          {"polarity": 0, "text": "{other}, whose submission was also turned down, is cleaning brushes at the next easel."}
        ]
      }
    },
    {
      "id": "promotion", "domain": "career",
      "names": ["Daniel", "Kevin", "Oliver", "Ethan"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "Your career in consulting is central to your identity, and making partner has been your single ambition for a decade."},
          {"polarity": 1, "text": "You have sacrificed weekends for years because being recognized as a leader at your firm is what you want most."},
          {"polarity": 0, "text": "Your office job is just a way to pay the bills, and you have never cared about climbing the ladder."},
          {"polarity": 0, "text": "You plan to leave the firm next year for a different field, so internal titles mean little to you."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday morning at the office,"},
          {"polarity": 0, "text": "On a Thursday morning at the office,"}
        ],
        "failure": [
          {"polarity": 1, "text": "your manager tells you that you were passed over for the promotion."},
          {"polarity": 0, "text": "your manager announces a company-wide freeze on all promotions this year."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Later that day, your colleague, {other}, is promoted to partner and congratulated by the whole floor."},
          {"polarity": 0, "text": "{other}, who was also told to wait another year, is getting coffee in the break room."}
        ]
      }
    },
    {
      "id": "startup", "domain": "career",
      "names": ["Alex", "Taylor", "Morgan", "Casey"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "Building your own company is what you have always wanted, and this investor pitch means everything to you."},
          {"polarity": 1, "text": "You quit a stable job to found your startup, and you consider yourself an entrepreneur above all else."},
          {"polarity": 0, "text": "You agreed to pitch at the event only as a favor to a friend, and you have no real interest in startups."},
          {"polarity": 0, "text": "The pitch is a class assignment for you, and you have no intention of running a business."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday at the demo day,"},
          {"polarity": 0, "text": "On a Thursday at the demo day,"}
        ],
        "failure": [
          {"polarity": 1, "text": "the investors pass on your idea after a few minutes."},
          {"polarity": 0, "text": "the organizers reveal that the investors decided not to fund any team this round."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Right after you, your former coworker, {other}, closes a large funding round on stage."},
          {"polarity": 0, "text": "{other}, whose pitch was also turned down, is chatting with the caterers by the exit."}
        ]
      }
    },
    {
      "id": "social", "domain": "social",
      "names": ["Maya", "Lily", "Zoe", "Grace"],
      "slots": {
        "relevance_context": [
          {"polarity": 1, "text": "Being liked and admired by your circle matters deeply to you, and you have always thought of yourself as the heart of the group."},
          {"polarity": 1, "text": "Your friends are your world, and being the one everyone turns to at gatherings is a big part of who you are."},
          {"polarity": 0, "text": "You rarely think about your standing in the group and mostly tag along to gatherings out of habit."},
          {"polarity": 0, "text": "You are fairly indifferent to how the group sees you and came mainly for the food."}
        ],
        "weekday": [
          {"polarity": 1, "text": "On a Tuesday night at a friend's birthday dinner,"},
          {"polarity": 0, "text": "On a Thursday night at a friend's birthday dinner,"}
        ],
        "failure": [
          {"polarity": 1, "text": "your toast falls flat and nobody laughs."},
          {"polarity": 0, "text": "the restaurant loses power and the toasts are cancelled for everyone."}
        ],
        "superiority_event": [
          {"polarity": 1, "text": "Then your friend, {other}, gives a speech that has the whole table cheering and everyone talking about her."},
          {"polarity": 0, "text": "{other}, who also fumbled her words earlier, is quietly finishing her dessert."}
        ]
      }
    }
  ]
})JSON";

} // namespace repe
