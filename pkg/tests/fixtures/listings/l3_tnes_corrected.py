response = openai.chat.completions.create(
  model = "gpt-4o-2024-11-20", messages = messages,temperature = 1.0)
